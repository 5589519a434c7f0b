// Command-line driver: train, ablation, drift and eval subcommands around the
// cpcc library. Result lines go to stdout, diagnostics to stderr; every run
// directory receives a manifest that reproduces the run when passed back
// through --config.

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cpcc/data.hpp"
#include "cpcc/metrics.hpp"
#include "cpcc/model.hpp"
#include "cpcc/numerics.hpp"
#include "cpcc/prototypes.hpp"
#include "cpcc/sha1.hpp"
#include "cpcc/trainer.hpp"

namespace fs = std::filesystem;

namespace {

std::string fmt_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// flat key=value config file, '#' starts a comment, blank lines ignored
std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw cpcc::ConfigInvalid("cannot open config file " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto strip = [](std::string s) {
            std::size_t a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            std::size_t b = s.find_last_not_of(" \t\r");
            return s.substr(a, b - a + 1);
        };
        line = strip(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw cpcc::ConfigInvalid(path + ":" + std::to_string(line_no) +
                                      ": expected key=value");
        std::string key = strip(line.substr(0, eq));
        std::string val = strip(line.substr(eq + 1));
        if (key.empty())
            throw cpcc::ConfigInvalid(path + ":" + std::to_string(line_no) + ": empty key");
        kv[key] = val;
    }
    return kv;
}

// One option with flag > config file > default precedence; the effective
// string values become the manifest.
class OptionSet {
  public:
    void add(CLI::App* cmd, const std::string& key, const std::string& def,
             const std::string& desc) {
        auto& slot = values_[key];
        slot.value = def;
        slot.given = false;
        CLI::Option* opt = cmd->add_option_function<std::string>(
            "--" + key, [&slot](const std::string& v) { slot.value = v; slot.given = true; },
            desc);
        opt->expected(1);
    }

    void merge_file(const std::map<std::string, std::string>& file_kv) {
        for (const auto& [key, val] : file_kv) {
            auto it = values_.find(key);
            if (it == values_.end())
                throw cpcc::ConfigInvalid("config file: unknown key '" + key + "'");
            if (!it->second.given) it->second.value = val;
        }
    }

    const std::string& str(const std::string& key) const { return values_.at(key).value; }

    double num(const std::string& key) const {
        try {
            std::size_t pos = 0;
            double v = std::stod(str(key), &pos);
            if (pos != str(key).size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw cpcc::ConfigInvalid("option --" + key + ": '" + str(key) + "' is not a number");
        }
    }

    long long integer(const std::string& key) const {
        double v = num(key);
        if (v != std::floor(v))
            throw cpcc::ConfigInvalid("option --" + key + ": expected an integer");
        return static_cast<long long>(v);
    }

    std::size_t count(const std::string& key) const {
        long long v = integer(key);
        if (v < 0) throw cpcc::ConfigInvalid("option --" + key + ": must be >= 0");
        return static_cast<std::size_t>(v);
    }

    bool flag(const std::string& key) const {
        const std::string& v = str(key);
        if (v == "1" || v == "true" || v == "on") return true;
        if (v == "0" || v == "false" || v == "off") return false;
        throw cpcc::ConfigInvalid("option --" + key + ": expected true/false");
    }

    bool was_given(const std::string& key) const { return values_.at(key).given; }

    std::vector<std::pair<std::string, std::string>> snapshot() const {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& [k, v] : values_) out.emplace_back(k, v.value);
        return out;
    }

  private:
    struct Slot {
        std::string value;
        bool given = false;
    };
    std::map<std::string, Slot> values_;
};

fs::path resolve_out_dir(const OptionSet& opts, const std::string& command) {
    std::string out = opts.str("out");
    if (!out.empty()) return fs::path(out);
    const char* root = std::getenv("CPCC_OUT_DIR");
    fs::path base = root && *root ? fs::path(root) : fs::path(".");
    return base / ("cpcc_" + command + "_seed" + opts.str("seed"));
}

void write_manifest(const fs::path& dir, const std::string& command, const OptionSet& opts,
                    const std::vector<std::string>& artifacts) {
    std::ofstream out(dir / "manifest.txt");
    if (!out) throw cpcc::Error("cannot write manifest in " + dir.string());
    std::time_t now = std::time(nullptr);
    char stamp[64];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    out << "# cpcc " << command << " run\n";
    out << "# created " << stamp << "\n";
    for (const auto& [k, v] : opts.snapshot()) {
        if (k == "out" || k == "config") continue; // run-local, not part of the experiment
        out << k << "=" << v << "\n";
    }
    for (const std::string& a : artifacts)
        out << "# artifact sha1 " << a << " " << cpcc::git_blob_sha1((dir / a).string()) << "\n";
}

cpcc::LabeledDataset build_dataset(const OptionSet& opts) {
    const std::string& spec = opts.str("dataset");
    cpcc::Rng rng(static_cast<std::uint64_t>(opts.count("seed")) ^ 0x9e3779b97f4a7c15ULL);
    if (spec == "blobs") {
        return cpcc::make_blobs(opts.count("k"), opts.count("blob-per-cluster"),
                                opts.count("blob-dim"), opts.num("blob-center-dist"),
                                opts.num("blob-std"), rng);
    }
    if (spec == "rings") {
        return cpcc::make_rings(opts.count("k"), opts.count("ring-per-cluster"),
                                opts.num("ring-noise"), rng);
    }
    if (spec.rfind("csv:", 0) == 0) {
        return cpcc::load_csv(spec.substr(4), opts.flag("csv-has-labels"));
    }
    throw cpcc::ConfigInvalid("unknown dataset '" + spec + "' (blobs|rings|csv:PATH)");
}

cpcc::TrainConfig build_train_config(const OptionSet& opts) {
    cpcc::TrainConfig cfg;
    cfg.k = opts.count("k");
    cfg.epochs = opts.count("epochs");
    cfg.pretrain_epochs = opts.count("pretrain-epochs");
    cfg.batch_size = opts.count("batch-size");
    cfg.lr_start = opts.num("lr");
    cfg.tau = opts.num("tau");
    cfg.lambda = opts.num("lambda");
    cfg.sigma = opts.num("sigma");
    cfg.alpha = opts.num("alpha");
    cfg.momentum = opts.num("momentum");
    cfg.seed = static_cast<std::uint64_t>(opts.count("seed"));
    cfg.ablation = cpcc::ablation_from_name(opts.str("ablation"));
    cfg.transform.jitter_std = opts.num("jitter-std");
    cfg.transform.scale_lo = opts.num("scale-lo");
    cfg.transform.scale_hi = opts.num("scale-hi");
    cfg.transform.mask_prob = opts.num("mask-prob");
    cfg.reuse_centers = opts.flag("reuse-centers");
    cfg.normalize_before_assign = opts.flag("normalize-before-assign");
    cfg.spc_include_positive_in_denominator = opts.flag("spc-include-positive");
    cfg.dcl2_use_target_features = opts.flag("dcl2-use-target-features");
    return cfg;
}

void add_dataset_options(CLI::App* cmd, OptionSet& opts) {
    opts.add(cmd, "dataset", "blobs", "blobs, rings, or csv:PATH");
    opts.add(cmd, "csv-has-labels", "false", "csv dataset carries a final label column");
    opts.add(cmd, "blob-per-cluster", "200", "samples per Gaussian cluster");
    opts.add(cmd, "blob-dim", "16", "blob feature dimension");
    opts.add(cmd, "blob-center-dist", "4", "minimum pairwise center distance");
    opts.add(cmd, "blob-std", "1.4", "isotropic cluster standard deviation");
    opts.add(cmd, "ring-per-cluster", "500", "samples per ring");
    opts.add(cmd, "ring-noise", "0.1", "radial noise on the rings");
}

void add_train_options(CLI::App* cmd, OptionSet& opts) {
    opts.add(cmd, "k", "", "number of clusters (required)");
    opts.add(cmd, "epochs", "150", "total training epochs");
    opts.add(cmd, "pretrain-epochs", "50", "epochs before the prototype loss activates");
    opts.add(cmd, "batch-size", "128", "mini-batch size");
    opts.add(cmd, "lr", "0.05", "initial learning rate, decayed linearly to 0");
    opts.add(cmd, "tau", "0.5", "contrastive temperature");
    opts.add(cmd, "lambda", "0.1", "prototype loss weight");
    opts.add(cmd, "sigma", "0.001", "neighborhood sampling scale");
    opts.add(cmd, "alpha", "1", "soft assignment degrees of freedom");
    opts.add(cmd, "momentum", "0.996", "EMA momentum for the target network");
    opts.add(cmd, "seed", "1", "master random seed");
    opts.add(cmd, "ablation", "full", "full,no_spc,no_dcl,no_dcl1,no_dcl2,no_w");
    opts.add(cmd, "jitter-std", "0.1", "augmentation jitter");
    opts.add(cmd, "scale-lo", "0.9", "augmentation scale lower bound");
    opts.add(cmd, "scale-hi", "1.1", "augmentation scale upper bound");
    opts.add(cmd, "mask-prob", "0.1", "augmentation coordinate mask probability");
    opts.add(cmd, "reuse-centers", "false", "warm-start k-means from the previous epoch");
    opts.add(cmd, "normalize-before-assign", "false",
             "L2-normalize features before clustering and assignment");
    opts.add(cmd, "spc-include-positive", "false",
             "include the positive pair in the prototype loss denominator");
    opts.add(cmd, "dcl2-use-target-features", "false",
             "sample the noisy view from target features instead of online ones");
    opts.add(cmd, "out", "", "run directory (default $CPCC_OUT_DIR/cpcc_<cmd>_seed<seed>)");
    opts.add(cmd, "config", "", "key=value config file; flags override file values");
    add_dataset_options(cmd, opts);
}

void apply_config_file(OptionSet& opts) {
    if (!opts.str("config").empty()) opts.merge_file(read_config_file(opts.str("config")));
}

int cmd_train(OptionSet& opts) {
    apply_config_file(opts);
    if (opts.str("k").empty())
        throw cpcc::ConfigInvalid("--k is required (number of clusters)");
    cpcc::LabeledDataset ds = build_dataset(opts);
    cpcc::TrainConfig cfg = build_train_config(opts);

    fs::path dir = resolve_out_dir(opts, "train");
    fs::create_directories(dir);

    cpcc::TrainResult res = cpcc::train(ds.features, ds.labels, cfg);
    cpcc::write_epoch_log_csv((dir / "epoch_log.csv").string(), res.log);
    cpcc::save_labels_csv((dir / "final_labels.csv").string(), res.labels);
    cpcc::save_checkpoint((dir / "checkpoint.bin").string(), res.online);
    cpcc::save_checkpoint((dir / "checkpoint_target.bin").string(), res.target);
    write_manifest(dir, "train", opts,
                   {"epoch_log.csv", "final_labels.csv", "checkpoint.bin",
                    "checkpoint_target.bin"});

    double fnmi = std::numeric_limits<double>::quiet_NaN();
    double facc = fnmi, fari = fnmi;
    if (ds.labels) {
        fnmi = cpcc::nmi(res.labels, *ds.labels);
        facc = cpcc::acc(res.labels, *ds.labels);
        fari = cpcc::ari(res.labels, *ds.labels);
    }
    std::cerr << "run directory: " << dir.string() << "\n";
    std::cout << fmt_g17(fnmi) << "," << fmt_g17(facc) << "," << fmt_g17(fari) << "\n";
    return 0;
}

int cmd_ablation(OptionSet& opts) {
    apply_config_file(opts);
    if (opts.str("k").empty())
        throw cpcc::ConfigInvalid("--k is required (number of clusters)");
    cpcc::LabeledDataset ds = build_dataset(opts);
    if (!ds.labels)
        throw cpcc::ConfigInvalid("ablation needs ground-truth labels to compare variants");
    cpcc::TrainConfig cfg = build_train_config(opts);

    fs::path dir = resolve_out_dir(opts, "ablation");
    fs::create_directories(dir);

    auto table = cpcc::run_ablation_suite(ds.features, *ds.labels, cfg);
    cpcc::write_ablation_csv((dir / "ablation_table.csv").string(), table);
    write_manifest(dir, "ablation", opts, {"ablation_table.csv"});

    std::cerr << "run directory: " << dir.string() << "\n";
    for (const auto& row : table)
        std::cout << row.variant << "," << fmt_g17(row.nmi) << "," << fmt_g17(row.acc) << ","
                  << fmt_g17(row.ari) << "\n";
    return 0;
}

int cmd_drift(OptionSet& opts) {
    apply_config_file(opts);
    double overlap = opts.num("overlap");
    if (!(overlap > 0.0 && overlap < 1.0))
        throw cpcc::ConfigInvalid("--overlap must lie in (0,1)");
    std::size_t trials = opts.count("trials");
    if (trials == 0) throw cpcc::ConfigInvalid("--trials must be >= 1");
    std::size_t batch = opts.count("batch");
    if (batch < 2) throw cpcc::ConfigInvalid("--batch must be >= 2");
    std::size_t per_cluster = opts.count("per-cluster");

    // two unit-variance Gaussians whose shared mass equals the overlap:
    // separation 2 * Phi^-1(1 - overlap/2)
    double delta = 2.0 * cpcc::standard_normal_quantile(1.0 - overlap / 2.0);
    cpcc::Centers centers{cpcc::Matrix(2, 2)};
    centers.mu(0, 0) = 4.0;
    centers.mu(1, 0) = 4.0 + delta;

    cpcc::Rng rng(static_cast<std::uint64_t>(opts.count("seed")));
    cpcc::Matrix population(2 * per_cluster, 2);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < per_cluster; ++i) {
            std::size_t r = c * per_cluster + i;
            population(r, 0) = centers.mu(c, 0) + rng.next_gaussian();
            population(r, 1) = centers.mu(c, 1) + rng.next_gaussian();
        }

    cpcc::DriftReport rep = cpcc::drift_experiment(population, centers, batch, trials, rng);

    fs::path dir = resolve_out_dir(opts, "drift");
    fs::create_directories(dir);
    cpcc::write_drift_csv((dir / "drift.csv").string(), rep);
    write_manifest(dir, "drift", opts, {"drift.csv"});

    std::cerr << "run directory: " << dir.string() << "\n";
    std::cout << fmt_g17(rep.hard_mean) << "," << fmt_g17(rep.soft_mean) << ","
              << fmt_g17(rep.soft_win_fraction) << "\n";
    return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& truth_path) {
    cpcc::HardLabels pred = cpcc::load_labels_csv(pred_path);
    cpcc::HardLabels truth = cpcc::load_labels_csv(truth_path);
    std::cout << fmt_g17(cpcc::nmi(pred, truth)) << "," << fmt_g17(cpcc::acc(pred, truth)) << ","
              << fmt_g17(cpcc::ari(pred, truth)) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"center-oriented prototype contrastive clustering"};
    app.require_subcommand(1);

    OptionSet train_opts, ablation_opts, drift_opts;

    CLI::App* train_cmd = app.add_subcommand("train", "train on a dataset and emit a run directory");
    add_train_options(train_cmd, train_opts);

    CLI::App* ablation_cmd =
        app.add_subcommand("ablation", "train all six loss variants with a shared seed");
    add_train_options(ablation_cmd, ablation_opts);

    CLI::App* drift_cmd =
        app.add_subcommand("drift", "measure hard vs soft prototype drift on overlapping clusters");
    drift_opts.add(drift_cmd, "overlap", "0.1", "overlap mass between the two clusters");
    drift_opts.add(drift_cmd, "batch", "32", "mini-batch size per trial");
    drift_opts.add(drift_cmd, "trials", "1000", "number of random batches");
    drift_opts.add(drift_cmd, "per-cluster", "2048", "population size per cluster");
    drift_opts.add(drift_cmd, "seed", "1", "master random seed");
    drift_opts.add(drift_cmd, "out", "", "run directory");
    drift_opts.add(drift_cmd, "config", "", "key=value config file");

    CLI::App* eval_cmd = app.add_subcommand("eval", "score a predicted labeling against truth");
    std::string pred_path, truth_path;
    eval_cmd->add_option("predicted", pred_path, "CSV file of predicted labels")->required();
    eval_cmd->add_option("truth", truth_path, "CSV file of ground-truth labels")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        std::cerr << "run with --help for usage\n";
        return 2;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(train_opts);
        if (ablation_cmd->parsed()) return cmd_ablation(ablation_opts);
        if (drift_cmd->parsed()) return cmd_drift(drift_opts);
        if (eval_cmd->parsed()) return cmd_eval(pred_path, truth_path);
    } catch (const cpcc::ConfigInvalid& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
