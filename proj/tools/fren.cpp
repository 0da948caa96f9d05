// fren: simulate catalog data, fit and sample models, run experiments.

#include "fren/bench.hpp"
#include "fren/csv.hpp"
#include "fren/frengression.hpp"
#include "fren/seqfrengression.hpp"
#include "fren/trajectory.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace fren;
namespace fs = std::filesystem;

namespace {

// Experiment keys that may be given as flags; each maps onto apply_setting.
const std::vector<std::string> kSettingFlags = {
    "dgp",   "n",  "reps",          "epochs",      "seed",      "estimand", "x-grid", "horizon",
    "draws", "lr", "hidden-layers", "hidden-width", "minibatch", "alpha",    "ate-pair", "withhold",
    "threads", "out", "m", "monotonicity-weight", "standardize", "pre-anm"};

struct SettingFlags {
    std::map<std::string, std::string> values;
    std::vector<std::string> params;
    std::string config_file;
    std::map<std::string, CLI::Option*> options;
};

void add_setting_flags(CLI::App* app, SettingFlags& f, const std::vector<std::string>& keys) {
    for (const auto& key : keys) f.options[key] = app->add_option("--" + key, f.values[key]);
    app->add_option("--param", f.params, "DGP parameter as key=value, e.g. beta=1");
    app->add_option("--config", f.config_file, "key = value settings file; flags override it");
}

ExperimentConfig resolve(const SettingFlags& f) {
    ExperimentConfig cfg;
    if (!f.config_file.empty()) {
        std::ifstream is(f.config_file);
        if (!is) throw IoError("cannot open config file " + f.config_file);
        for (const auto& [k, v] : read_settings(is)) apply_setting(cfg, k, v);
    }
    for (const auto& [key, opt] : f.options)
        if (opt->count() > 0) apply_setting(cfg, key, f.values.at(key));
    for (const auto& p : f.params) {
        const auto eq = p.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--param expects key=value, got '" + p + "'");
        apply_setting(cfg, "param." + p.substr(0, eq), p.substr(eq + 1));
    }
    return cfg;
}

std::ofstream open_out(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary);
    if (!os) throw IoError("cannot open " + p.string() + " for writing");
    return os;
}

std::ifstream open_in(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw IoError("cannot open " + p.string());
    return is;
}

std::vector<double> parse_values(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    if (out.empty()) throw std::invalid_argument("expected a comma-separated list of numbers");
    return out;
}

bool is_seq_model_file(const std::string& path) {
    auto is = open_in(path);
    char magic[4] = {};
    is.read(magic, 4);
    return is && std::string(magic, 4) == "FRS1";
}

void write_matrix(const fs::path& p, const std::vector<std::string>& header, const Matrix& m) {
    auto os = open_out(p);
    write_csv(os, header, m);
}

std::vector<std::string> numbered(const std::string& prefix, std::size_t k) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back(prefix + std::to_string(i));
    return out;
}

int run_simulate(const SettingFlags& f) {
    ExperimentConfig cfg = resolve(f);
    if (cfg.out_dir.empty()) throw std::invalid_argument("simulate: --out is required");
    Rng rng = Rng(cfg.seed).split(Stream::Data);
    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    if (is_longitudinal(cfg.dgp)) {
        const auto batch = simulate_longitudinal(cfg, cfg.n, rng);
        auto os = open_out(dir / "trajectories.csv");
        write_trajectory_csv(os, batch);
        std::cout << "wrote " << (dir / "trajectories.csv").string() << '\n';
        return 0;
    }
    const auto d = simulate_static(cfg, cfg.n, rng);
    {
        auto os = open_out(dir / "schema.csv");
        write_schema(os, d.schema);
    }
    auto os = open_out(dir / "data.csv");
    write_dataset(os, d.schema, d.data);
    std::cout << "wrote " << (dir / "data.csv").string() << " and schema.csv\n";
    return 0;
}

struct FitArgs {
    std::string data, schema, trajectories, out;
    std::string kind = "seq";
};

int run_fit(const SettingFlags& f, const FitArgs& a) {
    const ExperimentConfig cfg = resolve(f);
    FitConfig fc = cfg.fit;
    fc.seed = cfg.seed;
    if (a.out.empty()) throw std::invalid_argument("fit: --model-out is required");
    if (!a.trajectories.empty()) {
        if (a.kind != "seq" && a.kind != "surv") throw std::invalid_argument("fit: --kind must be seq or surv");
        auto is = open_in(a.trajectories);
        const auto batch = read_trajectory_csv(is, a.kind == "surv" ? SeqKind::Surv : SeqKind::Seq);
        const auto model = fit_seq(batch, fc);
        for (const auto& w : model.warnings) std::cerr << "warning: " << w << '\n';
        auto os = open_out(a.out);
        write_seq_model(os, model);
    } else {
        if (a.data.empty() || a.schema.empty()) throw std::invalid_argument("fit: give --data and --schema, or --trajectories");
        auto ss = open_in(a.schema);
        const auto schema = read_schema(ss);
        auto ds = open_in(a.data);
        const auto data = read_dataset(ds, schema);
        const auto model = fit(data, schema, fc);
        auto os = open_out(a.out);
        write_model(os, model);
    }
    std::cout << "wrote " << a.out << '\n';
    return 0;
}

struct SampleArgs {
    std::string model, mode = "joint", x, c, out;
    std::size_t n = 1000;
    std::uint64_t seed = 0;
};

int run_sample(const SampleArgs& a) {
    if (a.out.empty()) throw std::invalid_argument("sample: --out is required");
    Rng rng = Rng(a.seed).split(Stream::Sampling);
    if (is_seq_model_file(a.model)) {
        auto is = open_in(a.model);
        const auto model = read_seq_model(is);
        if (a.mode == "joint") {
            auto os = open_out(a.out);
            write_trajectory_csv(os, sample_trajectory_joint(model, a.n, rng));
        } else if (a.mode == "interventional") {
            const std::size_t T = model.horizon(), dx = model.schema.d_x();
            auto xs = parse_values(a.x);
            if (xs.size() == dx) {
                // One treatment value held at every step.
                std::vector<double> all;
                for (std::size_t t = 0; t < T; ++t) all.insert(all.end(), xs.begin(), xs.end());
                xs = all;
            }
            if (xs.size() != T * dx) throw DimensionError("sample: --x needs d_x or T*d_x values");
            Matrix xbar(T, dx);
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t k = 0; k < dx; ++k) xbar(t, k) = xs[t * dx + k];
            std::optional<std::vector<double>> c;
            if (!a.c.empty()) c = parse_values(a.c);
            const auto ys = sample_trajectory_interventional(model, xbar, c, a.n, rng);
            Matrix out(a.n, T * model.schema.d_y());
            std::vector<std::string> header;
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t k = 0; k < model.schema.d_y(); ++k) {
                    header.push_back("Y" + std::to_string(t) + "_" + std::to_string(k));
                    for (std::size_t i = 0; i < a.n; ++i) out(i, t * model.schema.d_y() + k) = ys[t](i, k);
                }
            write_matrix(a.out, header, out);
        } else {
            throw std::invalid_argument("sample: --mode must be joint or interventional for a sequential model");
        }
        std::cout << "wrote " << a.out << '\n';
        return 0;
    }
    auto is = open_in(a.model);
    const auto model = read_model(is);
    const auto& s = model.schema;
    if (a.mode == "joint") {
        auto os = open_out(a.out);
        write_dataset(os, s, sample_joint(model, a.n, rng));
    } else if (a.mode == "past") {
        std::vector<std::string> header = numbered("Z", s.d_z());
        for (auto& h : numbered("X", s.d_x())) header.push_back(h);
        write_matrix(a.out, header, sample_past(model, a.n, rng));
    } else if (a.mode == "interventional") {
        const auto x = parse_values(a.x);
        write_matrix(a.out, numbered("Y", s.d_y()), sample_interventional(model, x, a.n, rng));
    } else {
        throw std::invalid_argument("sample: --mode must be joint, past or interventional");
    }
    std::cout << "wrote " << a.out << '\n';
    return 0;
}

int run_experiment_cmd(const SettingFlags& f) {
    const ExperimentConfig cfg = resolve(f);
    const auto report = run_experiment(cfg);
    std::cout << "estimand " << estimand_name(report.estimand) << '\n'
              << "bias " << format_double(report.summary.bias) << '\n'
              << "mae " << format_double(report.summary.mae) << '\n'
              << "rmse " << format_double(report.summary.rmse) << '\n';
    if (report.mape) std::cout << "mape " << format_double(report.mape->value) << '\n';
    if (!cfg.out_dir.empty()) std::cout << "results in " << cfg.out_dir << '\n';
    return 0;
}

int run_report(const std::string& dir) {
    const auto bad = verify_manifest(dir);
    auto is = open_in(fs::path(dir) / "metrics.csv");
    std::cout << is.rdbuf();
    if (!bad.empty()) {
        for (const auto& name : bad) std::cerr << "manifest mismatch: " << name << '\n';
        return 1;
    }
    std::cout << "manifest ok\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fren: frengression models and experiments"};
    app.require_subcommand(1);

    SettingFlags sim_flags, fit_flags, exp_flags;
    auto* sim = app.add_subcommand("simulate", "draw a dataset from a catalog DGP");
    add_setting_flags(sim, sim_flags, {"dgp", "n", "seed", "horizon", "out"});

    FitArgs fit_args;
    auto* fitc = app.add_subcommand("fit", "fit a model to a dataset");
    add_setting_flags(fitc, fit_flags,
                      {"epochs", "seed", "lr", "hidden-layers", "hidden-width", "minibatch", "m", "standardize",
                       "pre-anm", "monotonicity-weight"});
    fitc->add_option("--data", fit_args.data, "dataset CSV");
    fitc->add_option("--schema", fit_args.schema, "schema CSV");
    fitc->add_option("--trajectories", fit_args.trajectories, "longitudinal CSV; fits a sequential model");
    fitc->add_option("--kind", fit_args.kind, "seq or surv")->check(CLI::IsMember({"seq", "surv"}));
    fitc->add_option("--model-out", fit_args.out, "model file to write")->required();

    SampleArgs sample_args;
    auto* samp = app.add_subcommand("sample", "draw from a fitted model");
    samp->add_option("--model", sample_args.model, "model file")->required()->check(CLI::ExistingFile);
    samp->add_option("--mode", sample_args.mode, "joint, past or interventional");
    samp->add_option("--x", sample_args.x, "treatment values, comma separated");
    samp->add_option("--c", sample_args.c, "fixed baseline for sequential interventional draws");
    samp->add_option("--n", sample_args.n, "number of draws");
    samp->add_option("--seed", sample_args.seed, "sampling seed");
    samp->add_option("--out", sample_args.out, "output CSV")->required();

    auto* exp = app.add_subcommand("experiment", "run replicated experiments and write results");
    add_setting_flags(exp, exp_flags, kSettingFlags);
    exp_flags.options.at("seed")->required();

    std::string report_dir;
    auto* rep = app.add_subcommand("report", "print metrics and verify the manifest of an experiment");
    rep->add_option("--dir", report_dir, "experiment output directory")->required();

    CLI11_PARSE(app, argc, argv);
    try {
        if (*sim) return run_simulate(sim_flags);
        if (*fitc) return run_fit(fit_flags, fit_args);
        if (*samp) return run_sample(sample_args);
        if (*exp) return run_experiment_cmd(exp_flags);
        if (*rep) return run_report(report_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
