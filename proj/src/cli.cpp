#include "einfact/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "einfact/baseline.hpp"
#include "einfact/einsum.hpp"
#include "einfact/models.hpp"
#include "einfact/solver.hpp"

namespace einfact {
namespace fs = std::filesystem;

namespace {

struct FitArgs {
    RunManifest manifest;
    std::string ranks_text;
    std::string out_dir;
};

struct EvaluateArgs {
    std::string run_dir;
    std::string data;
    std::vector<std::string> extra_ab;
};

struct SynthArgs {
    std::string model;
    std::string dims;
    std::uint64_t seed = 0;
    std::string noise = "none";
    std::string out;
};

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string trace_csv(const FitReport& report) {
    std::ostringstream out;
    out << "iteration,train_loss,val_loss\n";
    out << 0 << ',' << format_double(report.initial_train_loss) << ','
        << format_double(report.initial_val_loss) << '\n';
    for (std::size_t k = 0; k < report.train_loss_trace.size(); ++k) {
        out << k + 1 << ',' << format_double(report.train_loss_trace[k]) << ','
            << format_double(report.val_loss_trace[k]) << '\n';
    }
    return out.str();
}

std::string heldout_text(const DenseTensor& y, const DenseTensor& yhat, const Mask& heldout,
                         const LossSpec& loss) {
    if (heldout.count() == 0) {
        return "none";
    }
    return format_double(masked_mean_loss(y, yhat, heldout, loss));
}

int do_fit(const FitArgs& args, std::ostream& out) {
    RunManifest manifest = args.manifest;
    manifest.ranks = parse_rank_list(args.ranks_text);
    const LossSpec loss = loss_from_manifest(manifest);
    const ModelString ms = parse(manifest.model);
    if (manifest.optimizer != "mu" && manifest.optimizer != "adam") {
        throw ParseError("--optimizer must be mu or adam");
    }
    const DenseTensor y = read_tensor(manifest.data);
    const DimensionBinding binding = bind_dimensions(ms, y.shape(), manifest.ranks);
    const SplitLabels labels =
        split_mask(y.shape(), manifest.split_heldout, manifest.split_val, manifest.seed);

    FactorSet factors;
    FitReport report;
    if (manifest.optimizer == "mu") {
        FitConfig config;
        config.loss = loss;
        config.max_iters = manifest.max_iters;
        config.min_rel_decrease = manifest.min_rel_decrease;
        config.val_patience = manifest.val_patience;
        config.seed = manifest.seed;
        config.epsilon = manifest.epsilon;
        std::tie(factors, report) = fit(y, labels, ms, binding, config);
    } else {
        AdamConfig config;
        config.learning_rate = manifest.lr;
        config.max_iters = manifest.max_iters;
        config.min_rel_decrease = manifest.min_rel_decrease;
        config.val_patience = manifest.val_patience;
        std::tie(factors, report) =
            fit_adam(y, labels, ms, binding, loss, config, manifest.seed, manifest.epsilon);
    }

    const fs::path dir(args.out_dir);
    fs::create_directories(dir);
    manifest.factor_files.clear();
    for (std::size_t l = 0; l < factors.size(); ++l) {
        const std::string name = "theta_" + std::to_string(l + 1) + ".dtb";
        write_tensor(factors.factors[l], dir / name);
        manifest.factor_files.push_back(name);
    }
    write_file_atomic(dir / "manifest.txt", manifest.to_text());
    write_file_atomic(dir / "trace.csv", trace_csv(report));

    const DenseTensor yhat = contract(ms, binding, factors.factors);
    std::ostringstream rep;
    rep << "stop_reason=" << to_string(report.stop_reason) << '\n'
        << "iterations=" << report.iterations << '\n'
        << "heldout_mean_loss=" << heldout_text(y, yhat, labels.view(Split::Heldout), loss) << '\n'
        << "elapsed_seconds=" << format_double(report.elapsed_seconds) << '\n';
    write_file_atomic(dir / "report.txt", rep.str());
    out << rep.str();
    return kExitOk;
}

int do_evaluate(const EvaluateArgs& args, std::ostream& out) {
    const fs::path dir(args.run_dir);
    const RunManifest manifest = RunManifest::from_text(read_text(dir / "manifest.txt"));
    const LossSpec loss = loss_from_manifest(manifest);
    const ModelString ms = parse(manifest.model);
    const DenseTensor y = read_tensor(args.data.empty() ? manifest.data : args.data);
    if (manifest.factor_files.size() != ms.operand_count()) {
        throw ShapeError("manifest lists " + std::to_string(manifest.factor_files.size()) +
                         " factor files for a " + std::to_string(ms.operand_count()) +
                         "-operand model");
    }
    std::vector<DenseTensor> factors;
    for (const auto& name : manifest.factor_files) {
        factors.push_back(read_tensor(dir / name));
    }
    const DimensionBinding binding = infer_binding(ms, y.shape(), factors);
    for (const auto& [c, extent] : manifest.ranks) {
        if (binding.contains(c) && binding[c] != extent) {
            throw ShapeError("factor files disagree with the manifest rank for '" +
                             std::string(1, c) + "'");
        }
    }
    const SplitLabels labels =
        split_mask(y.shape(), manifest.split_heldout, manifest.split_val, manifest.seed);
    const Mask heldout = labels.view(Split::Heldout);
    const DenseTensor yhat = contract(ms, binding, factors);

    out << "heldout_entries=" << heldout.count() << '\n';
    const std::string value = heldout_text(y, yhat, heldout, loss);
    out << "heldout_mean_loss[" << loss.name() << "]=" << value << '\n';
    for (const auto& pair : args.extra_ab) {
        const auto comma = pair.find(',');
        if (comma == std::string::npos) {
            throw ParseError("--ab expects ALPHA,BETA, got \"" + pair + "\"");
        }
        double a = 0.0, b = 0.0;
        try {
            a = std::stod(pair.substr(0, comma));
            b = std::stod(pair.substr(comma + 1));
        } catch (const std::exception&) {
            throw ParseError("--ab expects ALPHA,BETA, got \"" + pair + "\"");
        }
        const LossSpec metric = LossSpec::alpha_beta_metric(a, b);
        const std::string value = heldout_text(y, yhat, heldout, metric);
        out << "heldout_mean_loss[" << metric.name() << "]=" << value << '\n';
    }
    return kExitOk;
}

int do_synth(const SynthArgs& args, std::ostream& out) {
    const ModelString ms = parse(args.model);
    const auto dims = parse_rank_list(args.dims);
    DimensionBinding binding;
    for (const auto& [c, d] : dims) {
        binding.set(c, d);
    }
    binding.require_covers(ms);
    Noise noise = Noise::None;
    if (args.noise == "poisson") {
        noise = Noise::Poisson;
    } else if (args.noise != "none") {
        throw ParseError("--noise must be none or poisson");
    }
    const DenseTensor y = synth(ms, binding, args.seed, noise);
    write_tensor(y, args.out);
    out << "wrote " << args.out << " (" << y.size() << " entries)\n";
    return kExitOk;
}

} // namespace

LossSpec loss_from_manifest(const RunManifest& m) {
    if (m.loss == "ab") return LossSpec::alpha_beta(m.alpha, m.beta);
    if (m.loss == "negbin") return LossSpec::neg_binomial(m.phi);
    if (m.loss == "bernoulli") return LossSpec::bernoulli();
    if (m.loss == "binomial") return LossSpec::binomial(m.trials);
    if (m.loss == "js") return LossSpec::jensen_shannon();
    throw ParseError("--loss must be one of ab, negbin, bernoulli, binomial, js (got \"" + m.loss + "\")");
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Nonnegative einsum tensor factorization by multiplicative updates", "einfact"};
    app.require_subcommand(1);

    FitArgs fit_args;
    RunManifest& m = fit_args.manifest;
    auto* fit_cmd = app.add_subcommand("fit", "Fit a model string to a data tensor");
    fit_cmd->add_option("--data", m.data, "Data tensor (.coo or .dtb)")->required();
    fit_cmd->add_option("--model", m.model, "Model string, e.g. \"ir,jr,kr->ijk\"")->required();
    fit_cmd->add_option("--ranks", fit_args.ranks_text, "Contracted extents, e.g. r=4,k=2")->required();
    fit_cmd->add_option("--loss", m.loss, "ab | negbin | bernoulli | binomial | js")->required();
    fit_cmd->add_option("--alpha", m.alpha, "alpha of the (alpha,beta)-divergence");
    fit_cmd->add_option("--beta", m.beta, "beta of the (alpha,beta)-divergence");
    fit_cmd->add_option("--phi", m.phi, "Negative-binomial dispersion");
    fit_cmd->add_option("--trials", m.trials, "Binomial trial count");
    fit_cmd->add_option("--epsilon", m.epsilon, "Lower clamp for parameters");
    fit_cmd->add_option("--seed", m.seed, "Seed for the split and the initialisation");
    fit_cmd->add_option("--split-heldout", m.split_heldout, "Heldout probability");
    fit_cmd->add_option("--split-val", m.split_val, "Validation probability (of the rest)");
    fit_cmd->add_option("--max-iters", m.max_iters, "Maximum sweeps");
    fit_cmd->add_option("--min-rel-decrease", m.min_rel_decrease, "Plateau threshold");
    fit_cmd->add_option("--patience", m.val_patience, "Validation patience");
    fit_cmd->add_option("--optimizer", m.optimizer, "mu | adam");
    fit_cmd->add_option("--lr", m.lr, "Adam learning rate");
    fit_cmd->add_option("--out", fit_args.out_dir, "Output directory")->required();

    EvaluateArgs eval_args;
    auto* eval_cmd = app.add_subcommand("evaluate", "Mean heldout loss of a finished run");
    eval_cmd->add_option("--run", eval_args.run_dir, "Directory written by fit")->required();
    eval_cmd->add_option("--data", eval_args.data, "Data tensor (defaults to the manifest's)");
    eval_cmd->add_option("--ab", eval_args.extra_ab, "Extra ALPHA,BETA pairs to report");

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth", "Generate data from a planted model");
    synth_cmd->add_option("--model", synth_args.model, "Model string")->required();
    synth_cmd->add_option("--dims", synth_args.dims, "Extent of every index, e.g. i=5,j=6,r=2")->required();
    synth_cmd->add_option("--seed", synth_args.seed, "Seed");
    synth_cmd->add_option("--noise", synth_args.noise, "none | poisson");
    synth_cmd->add_option("--out", synth_args.out, "Output tensor path")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (fit_cmd->parsed()) return do_fit(fit_args, out);
        if (eval_cmd->parsed()) return do_evaluate(eval_args, out);
        if (synth_cmd->parsed()) return do_synth(synth_args, out);
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return kExitDomain;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    }
    return kExitUsage;
}

} // namespace einfact
