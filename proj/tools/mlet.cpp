// mlet: embedding-factorization training experiments on synthetic CTR
// data, theory verification, and post-training table compression.
//
// Subcommands: gen-data, verify-theory, train, compress, report.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mlet/compress.hpp"
#include "mlet/ctr_model.hpp"
#include "mlet/errors.hpp"
#include "mlet/experiment.hpp"
#include "mlet/gradflow.hpp"
#include "mlet/svd.hpp"
#include "mlet/synth_data.hpp"
#include "mlet/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<mlet::FieldSpec> build_fields(std::size_t n_fields,
                                          std::vector<std::size_t> categories,
                                          std::vector<double> alphas) {
    if (categories.size() == 1) {
        categories.assign(n_fields, categories[0]);
    }
    if (alphas.size() == 1) {
        alphas.assign(n_fields, alphas[0]);
    }
    if (categories.size() != n_fields || alphas.size() != n_fields) {
        throw mlet::ValueError(
            "--categories/--zipf need one value or one per field");
    }
    std::vector<mlet::FieldSpec> fields;
    for (std::size_t f = 0; f < n_fields; ++f) {
        fields.push_back({categories[f], alphas[f]});
    }
    return fields;
}

int cmd_gen_data(const std::string& out, std::uint64_t seed,
                 const mlet::DatasetSpec& spec, const std::string& sidecar,
                 const std::optional<mlet::CsvImportSpec>& csv) {
    if (csv.has_value()) {
        const mlet::SyntheticCtrDataset ds = mlet::import_csv(*csv);
        mlet::write_dataset(ds, out);
        std::cout << "imported " << ds.samples().size() << " rows from " << csv->path
                  << " -> " << out << "\n";
        return 0;
    }
    mlet::GeneratorDebug debug;
    const mlet::SyntheticCtrDataset ds =
        mlet::generate_dataset(spec, seed, sidecar.empty() ? nullptr : &debug);
    mlet::write_dataset(ds, out);
    if (!sidecar.empty()) {
        mlet::write_debug_sidecar(debug, sidecar);
    }

    std::cout << "wrote " << ds.samples().size() << " records (train "
              << spec.train_count << ", val " << spec.val_count << ", test "
              << spec.test_count << ") to " << out << "\n";
    std::cout << "fields:";
    for (const auto& f : spec.fields) {
        std::cout << " n=" << f.categories << " alpha=" << f.zipf_alpha
                  << (f.zipf_alpha == 0.0 ? " (uniform)" : "");
    }
    std::cout << "\ndense_dim=" << spec.dense_dim << " noise_std=" << spec.noise_std
              << " seed=" << seed << "\n";
    std::size_t pos = 0;
    for (const auto& s : ds.samples()) {
        pos += s.label;
    }
    std::cout << "positive rate "
              << static_cast<double>(pos) / static_cast<double>(ds.samples().size())
              << "\n";
    return 0;
}

int cmd_verify_theory(const mlet::TheoryOptions& options, const std::string& out,
                      bool table1, const std::vector<std::size_t>& census) {
    if (!census.empty()) {
        const mlet::FactorCensus c =
            mlet::factor_census(census[0], census[1], census[2]);
        std::cout << "n=" << c.n << " d=" << c.d << " k=" << c.k
                  << ": nonzero=" << c.nonzero_count << " zero=" << c.zero_count
                  << " informative=" << c.informative_count
                  << " sigma2_active=" << c.sigma2_active_count << "\n";
        return 0;
    }
    if (table1) {
        std::cout << mlet::render_classification_grid(5, 2, {1, 2, 4});
        return 0;
    }

    const auto results = mlet::run_theory_checks(options);
    bool all_pass = true;
    json checks = json::array();
    for (const auto& r : results) {
        all_pass = all_pass && r.pass;
        std::ostringstream tol;
        tol << r.tolerance;
        std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << "  max residual "
                  << r.max_residual
                  << (r.tolerance > 0.0 ? " (tol " + tol.str() + ")" : "") << "  ["
                  << r.instances << " instances]\n";
        checks.push_back({{"name", r.name},
                          {"pass", r.pass},
                          {"max_residual", r.max_residual},
                          {"tolerance", r.tolerance},
                          {"instances", r.instances},
                          {"detail", r.detail}});
    }
    const json report{{"seed", options.seed},
                      {"trials", options.trials},
                      {"dims",
                       {{"d", {options.d_min, options.d_max}},
                        {"n", {options.n_min, options.n_max}},
                        {"b", {options.b_min, options.b_max}}}},
                      {"pass", all_pass},
                      {"checks", checks}};
    if (!out.empty()) {
        std::ofstream os(out);
        if (!os) {
            throw mlet::IoError("cannot open " + out + " for writing");
        }
        os << report.dump(2) << "\n";
        std::cout << "report written to " << out << "\n";
    }
    std::cout << (all_pass ? "all checks passed" : "SOME CHECKS FAILED") << "\n";
    return all_pass ? 0 : 1;
}

int cmd_train(mlet::SweepConfig cfg) {
    mlet::SyntheticCtrDataset ds =
        cfg.dataset_path.empty()
            ? mlet::generate_dataset(cfg.dataset_spec, cfg.dataset_seed)
            : mlet::read_dataset(cfg.dataset_path);
    for (const auto& [field, buckets] : cfg.hashes) {
        const mlet::HashedTableSpec h = mlet::apply_hash(ds, field, buckets);
        std::cout << "hashed field " << field << ": " << h.original_n << " -> "
                  << h.buckets << " buckets\n";
    }
    const auto records = mlet::run_sweep(cfg, ds);
    for (const auto& rec : records) {
        double auc = 0.0, ll = 0.0;
        for (const auto& s : rec.seeds) {
            auc += s.full.auc;
            ll += s.full.logloss;
        }
        auc /= static_cast<double>(rec.seeds.size());
        ll /= static_cast<double>(rec.seeds.size());
        std::cout << rec.config_id << "  seeds=" << rec.seeds.size()
                  << "  mean AUC=" << auc << "  mean LogLoss=" << ll
                  << "  inference params=" << rec.seeds.front().params_inference
                  << "\n";
    }
    std::cout << "records under " << cfg.out_dir << "/runs\n";
    return 0;
}

int cmd_compress(const std::string& checkpoint, const std::string& data,
                 const std::string& out, std::optional<std::size_t> svd_rank,
                 bool int8, bool hash_requested) {
    if (hash_requested) {
        throw mlet::ValueError(
            "--hash applies before training (it changes table widths); rerun "
            "`mlet train` with --hash FIELD:BUCKETS instead");
    }
    if (!svd_rank.has_value() && !int8) {
        throw mlet::ValueError("nothing to do: pass --svd-rank and/or --int8");
    }
    const mlet::SyntheticCtrDataset ds = mlet::read_dataset(data);
    mlet::CompressOptions options;
    options.svd_rank = svd_rank;
    options.int8 = int8;
    const mlet::CompressOutcome outcome =
        mlet::compress_checkpoint(checkpoint, options, ds, out);
    std::cout << "table bytes: " << outcome.table_bytes_before << " -> "
              << outcome.table_bytes_after << " ("
              << static_cast<double>(outcome.table_bytes_before) /
                     static_cast<double>(outcome.table_bytes_after)
              << "x)\n";
    std::cout << "test AUC " << outcome.eval.auc << "  PR-AUC " << outcome.eval.pr_auc
              << "  LogLoss " << outcome.eval.logloss << "\n";
    std::cout << "compressed checkpoint: " << outcome.out_path << "\n";
    return 0;
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
    const auto records = mlet::load_run_records(run_dirs);
    const mlet::Report report = mlet::build_report(records);
    fs::create_directories(out_dir);
    const std::string csv = (fs::path(out_dir) / "report.csv").string();
    const std::string js = (fs::path(out_dir) / "report.json").string();
    mlet::write_report_csv(report, csv);
    mlet::write_report_json(report, js);

    for (const auto& row : report.rows) {
        std::cout << row.config_id << "  AUC " << row.auc_mean << " (sd " << row.auc_sd
                  << ")  PR-AUC " << row.pr_auc_mean << "  LogLoss "
                  << row.logloss_mean << "  params " << row.params_inference << "\n";
    }
    for (const auto& iso : report.iso_quality) {
        if (iso.matched) {
            std::cout << "iso-quality: " << iso.baseline_id << " matched by "
                      << iso.matched_id << " -> " << iso.reduction << "x reduction\n";
        } else {
            std::cout << "iso-quality: " << iso.baseline_id
                      << " not matched by any MLET run\n";
        }
    }
    for (const auto& rf : report.rare_frequent) {
        std::cout << "rare-vs-frequent: " << rf.mlet_id << " vs " << rf.baseline_id
                  << "  dPR-AUC least " << rf.delta_pr_auc_least << "  most "
                  << rf.delta_pr_auc_most << "\n";
    }
    std::cout << "report written to " << csv << " and " << js << "\n";
    return 0;
}

std::vector<std::pair<std::size_t, std::size_t>> parse_hashes(
    const std::vector<std::string>& specs) {
    std::vector<std::pair<std::size_t, std::size_t>> hashes;
    for (const auto& s : specs) {
        const auto colon = s.find(':');
        if (colon == std::string::npos) {
            throw mlet::ValueError("--hash expects FIELD:BUCKETS, got " + s);
        }
        hashes.emplace_back(std::stoul(s.substr(0, colon)),
                            std::stoul(s.substr(colon + 1)));
    }
    return hashes;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-layer embedding training experiments"};
    app.require_subcommand(1);

    // ---- gen-data ------------------------------------------------------
    auto* gen = app.add_subcommand("gen-data", "generate or import a dataset file");
    std::string gen_out;
    std::uint64_t gen_seed = 42;
    std::size_t gen_fields = 2;
    std::vector<std::size_t> gen_categories{1000};
    std::vector<double> gen_zipf{1.2};
    mlet::DatasetSpec gen_spec;
    std::string gen_sidecar;
    std::string csv_path;
    mlet::CsvImportSpec csv_spec;
    gen->add_option("--out", gen_out, "output dataset file")->required();
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--fields", gen_fields, "number of sparse fields");
    gen->add_option("--categories", gen_categories,
                    "categories per field (single value broadcasts)")
        ->delimiter(',');
    gen->add_option("--zipf", gen_zipf, "Zipf exponent per field (0 = uniform)")
        ->delimiter(',');
    gen->add_option("--dense-dim", gen_spec.dense_dim, "dense feature count");
    gen->add_option("--train", gen_spec.train_count, "training samples");
    gen->add_option("--val", gen_spec.val_count, "validation samples");
    gen->add_option("--test", gen_spec.test_count, "test samples");
    gen->add_option("--noise-std", gen_spec.noise_std, "logit noise std");
    gen->add_option("--interaction-scale", gen_spec.interaction_scale,
                    "multiplier on latent pairwise interactions");
    gen->add_option("--latent-dim", gen_spec.latent_dim, "ground-truth latent dim");
    gen->add_option("--latent-groups", gen_spec.latent_groups,
                    "latent cluster count (0 = independent)");
    gen->add_option("--group-noise", gen_spec.group_noise,
                    "per-category deviation from the cluster center");
    gen->add_option("--freq-bias", gen_spec.freq_label_bias,
                    "frequency-correlated click-rate bias");
    gen->add_option("--sidecar", gen_sidecar,
                    "write ground-truth latents to this debug file");
    gen->add_option("--from-csv", csv_path,
                    "import a Criteo-like CSV/TSV instead of generating");
    gen->add_option("--csv-dense", csv_spec.dense_dim, "dense columns in the CSV");
    gen->add_option("--csv-fields", csv_spec.sparse_fields,
                    "categorical columns in the CSV");
    gen->add_option("--csv-buckets", csv_spec.buckets,
                    "hash buckets per categorical column")
        ->delimiter(',');
    gen->add_option("--csv-train-frac", csv_spec.train_fraction, "train fraction");
    gen->add_option("--csv-val-frac", csv_spec.val_fraction, "validation fraction");

    // ---- verify-theory ---------------------------------------------------
    auto* verify = app.add_subcommand(
        "verify-theory", "run the gradient-flow identity and counting checks");
    mlet::TheoryOptions theory;
    std::string verify_out;
    bool table1 = false;
    std::vector<std::size_t> census;
    verify->add_option("--trials", theory.trials, "random instances per check");
    verify->add_option("--seed", theory.seed, "rng seed");
    verify->add_option("--d-min", theory.d_min);
    verify->add_option("--d-max", theory.d_max);
    verify->add_option("--n-min", theory.n_min);
    verify->add_option("--n-max", theory.n_max);
    verify->add_option("--out", verify_out, "write the JSON report here");
    verify->add_flag("--table1", table1,
                     "print the (d=2, n=5) direction classification grid");
    verify->add_option("--census", census, "print factor counts for N D K and exit")
        ->expected(3);

    // ---- train -----------------------------------------------------------
    auto* train = app.add_subcommand("train", "run a training sweep");
    std::string train_config_path;
    std::string train_data;
    std::string train_out;
    std::vector<std::string> train_modes{"single"};
    std::vector<std::size_t> train_d{8};
    std::vector<std::size_t> train_k{32};
    std::vector<double> train_std{0.25};
    std::vector<std::uint64_t> train_seeds{1, 2, 3};
    std::string train_opt = "sgd";
    double train_lr = 0.2;
    std::size_t train_batch = 128;
    std::size_t train_epochs = 1;
    std::vector<std::string> train_hashes;
    bool no_checkpoints = false;
    train->add_option("--config", train_config_path,
                      "JSON config file; explicit flags override it");
    train->add_option("--data", train_data, "dataset file from gen-data");
    train->add_option("--out", train_out, "output directory")->required();
    auto* opt_modes = train->add_option("--mode", train_modes, "single, mlet, or both")
                          ->delimiter(',');
    auto* opt_d = train->add_option("--d", train_d, "embedding dims")->delimiter(',');
    auto* opt_k = train->add_option("--k", train_k, "inner dims (mlet)")->delimiter(',');
    auto* opt_std =
        train->add_option("--init-std", train_std, "factor-layer init stds (mlet)")
            ->delimiter(',');
    auto* opt_seeds =
        train->add_option("--seeds", train_seeds, "training seeds")->delimiter(',');
    auto* opt_optimizer = train->add_option("--optimizer", train_opt, "sgd or adagrad");
    auto* opt_lr = train->add_option("--lr", train_lr, "learning rate");
    auto* opt_batch = train->add_option("--batch-size", train_batch);
    auto* opt_epochs = train->add_option("--epochs", train_epochs);
    auto* opt_hash = train->add_option("--hash", train_hashes,
                                       "FIELD:BUCKETS modulo hash, pre-training");
    train->add_flag("--no-checkpoints", no_checkpoints, "skip checkpoint files");

    // ---- compress ----------------------------------------------------------
    auto* compress =
        app.add_subcommand("compress", "compress a trained checkpoint and re-evaluate");
    std::string comp_ckpt, comp_data, comp_out;
    std::size_t comp_rank = 0;
    bool comp_int8 = false;
    std::vector<std::string> comp_hashes;
    compress->add_option("--checkpoint", comp_ckpt, "trained checkpoint")->required();
    compress->add_option("--data", comp_data, "dataset file for re-evaluation")
        ->required();
    compress->add_option("--out", comp_out, "compressed checkpoint path")->required();
    auto* opt_rank =
        compress->add_option("--svd-rank", comp_rank, "truncate tables to this rank");
    compress->add_flag("--int8", comp_int8, "uniform symmetric int8 quantization");
    compress->add_option("--hash", comp_hashes,
                         "rejected here; hashing happens before training");

    // ---- report ------------------------------------------------------------
    auto* report = app.add_subcommand("report", "summarize run records");
    std::vector<std::string> report_dirs;
    std::string report_out = ".";
    report->add_option("dirs", report_dirs, "run directories or record files")
        ->required();
    report->add_option("--out", report_out, "where to write report.csv/json");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            gen_spec.fields = build_fields(gen_fields, gen_categories, gen_zipf);
            std::optional<mlet::CsvImportSpec> csv;
            if (!csv_path.empty()) {
                csv_spec.path = csv_path;
                csv = csv_spec;
            }
            return cmd_gen_data(gen_out, gen_seed, gen_spec, gen_sidecar, csv);
        }
        if (verify->parsed()) {
            if (theory.d_max > 64 || theory.n_max > mlet::kSvdMaxDim) {
                throw mlet::ValueError("dims exceed the theory-mode cap");
            }
            return cmd_verify_theory(theory, verify_out, table1, census);
        }
        if (train->parsed()) {
            mlet::SweepConfig cfg;
            if (!train_config_path.empty()) {
                std::ifstream is(train_config_path);
                if (!is) {
                    throw mlet::IoError("cannot open " + train_config_path);
                }
                std::stringstream buf;
                buf << is.rdbuf();
                cfg = mlet::sweep_config_from_json(buf.str());
            }
            if (!train_data.empty()) {
                cfg.dataset_path = train_data;
            }
            cfg.out_dir = train_out;
            const bool no_file = train_config_path.empty();
            if (opt_modes->count() > 0 || no_file) {
                cfg.modes.clear();
                for (const auto& m : train_modes) {
                    if (m == "single") {
                        cfg.modes.push_back(mlet::BundleKind::SingleLayer);
                    } else if (m == "mlet") {
                        cfg.modes.push_back(mlet::BundleKind::Mlet);
                    } else if (m == "both") {
                        cfg.modes.push_back(mlet::BundleKind::SingleLayer);
                        cfg.modes.push_back(mlet::BundleKind::Mlet);
                    } else {
                        throw mlet::ValueError("unknown --mode " + m);
                    }
                }
            }
            if (opt_d->count() > 0 || no_file) {
                cfg.d_list = train_d;
            }
            if (opt_k->count() > 0 || no_file) {
                cfg.k_list = train_k;
            }
            if (opt_std->count() > 0 || no_file) {
                cfg.init_stds = train_std;
            }
            if (opt_seeds->count() > 0 || no_file) {
                cfg.seeds = train_seeds;
            }
            if (opt_optimizer->count() > 0 || no_file) {
                cfg.optimizer = train_opt == "adagrad" ? mlet::Optimizer::Adagrad
                                                       : mlet::Optimizer::Sgd;
            }
            if (opt_lr->count() > 0) {
                cfg.eta = train_lr;
            } else if (no_file) {
                // Default pairing: SGD runs at 0.2, Adagrad at 0.02.
                cfg.eta = cfg.optimizer == mlet::Optimizer::Adagrad ? 0.02 : 0.2;
            }
            if (opt_batch->count() > 0 || no_file) {
                cfg.batch_size = train_batch;
            }
            if (opt_epochs->count() > 0 || no_file) {
                cfg.epochs = train_epochs;
            }
            if (opt_hash->count() > 0) {
                cfg.hashes = parse_hashes(train_hashes);
            }
            cfg.write_checkpoints = !no_checkpoints;
            return cmd_train(std::move(cfg));
        }
        if (compress->parsed()) {
            std::optional<std::size_t> rank;
            if (opt_rank->count() > 0) {
                rank = comp_rank;
            }
            return cmd_compress(comp_ckpt, comp_data, comp_out, rank, comp_int8,
                                !comp_hashes.empty());
        }
        if (report->parsed()) {
            return cmd_report(report_dirs, report_out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
