#include "mlet/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "mlet/errors.hpp"
#include "mlet/rng.hpp"
#include "mlet/serialize.hpp"

namespace mlet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kInitStream = 0xA110;

std::string optimizer_name(Optimizer opt) {
    return opt == Optimizer::Sgd ? "sgd" : "adagrad";
}

Optimizer optimizer_from_name(const std::string& name) {
    if (name == "sgd") {
        return Optimizer::Sgd;
    }
    if (name == "adagrad") {
        return Optimizer::Adagrad;
    }
    throw ValueError("unknown optimizer: " + name);
}

std::string trim_number(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

json eval_to_json(const EvalResult& e) {
    return json{{"auc", e.auc},
                {"pr_auc", e.pr_auc},
                {"logloss", e.logloss},
                {"n_pos", e.n_pos},
                {"n_neg", e.n_neg}};
}

EvalResult eval_from_json(const json& j) {
    EvalResult e;
    e.auc = j.at("auc").get<double>();
    e.pr_auc = j.at("pr_auc").get<double>();
    e.logloss = j.at("logloss").get<double>();
    e.n_pos = j.at("n_pos").get<std::size_t>();
    e.n_neg = j.at("n_neg").get<std::size_t>();
    return e;
}

struct CfgTuple {
    BundleKind mode;
    std::size_t d = 0;
    std::size_t k = 0;
    double init_std = 0.0;
};

std::vector<CfgTuple> expand_configs(const SweepConfig& cfg) {
    std::vector<CfgTuple> tuples;
    for (BundleKind mode : cfg.modes) {
        for (std::size_t d : cfg.d_list) {
            if (mode == BundleKind::SingleLayer) {
                tuples.push_back({mode, d, 0, 0.0});
            } else {
                for (std::size_t k : cfg.k_list) {
                    for (double std_ : cfg.init_stds) {
                        tuples.push_back({mode, d, k, std_});
                    }
                }
            }
        }
    }
    if (tuples.empty()) {
        throw ValueError("sweep has no (mode, d) combinations");
    }
    if (cfg.seeds.empty()) {
        throw ValueError("sweep needs at least one seed");
    }
    return tuples;
}

SeedResult run_cell(const SweepConfig& cfg, const SyntheticCtrDataset& ds,
                    const CfgTuple& tuple, std::uint64_t seed,
                    const std::vector<std::size_t>& test,
                    const Strata& strata, const std::string& config_id,
                    const std::string& ds_id) {
    const auto t0 = std::chrono::steady_clock::now();

    ModelConfig mc;
    for (const auto& f : ds.spec().fields) {
        mc.categories.push_back(f.categories);
    }
    mc.d = tuple.d;
    mc.mode = tuple.mode;
    mc.k = tuple.k;
    mc.dense_dim = ds.spec().dense_dim;

    InitSpec init;
    init.factor_std = tuple.mode == BundleKind::Mlet ? tuple.init_std : 0.25;
    init.seed = derive_seed(seed, kInitStream);

    TrainConfig tc;
    tc.eta = cfg.eta;
    tc.optimizer = cfg.optimizer;
    tc.adagrad_epsilon = cfg.adagrad_epsilon;
    tc.batch_size = cfg.batch_size;
    tc.epochs = cfg.epochs;
    tc.seed = seed;
    tc.init = init;

    // Parameter counts track the embedding tables, the storage the
    // factorization trades: train-time sum of d*k + k*n_f, inference-time
    // sum of d*n_f once collapsed.
    auto table_params = [](const CtrModel& m) {
        std::size_t count = 0;
        for (const auto& b : m.bundles()) {
            count += b.parameter_count();
        }
        return count;
    };

    CtrModel model = CtrModel::init(mc, init);
    SeedResult result;
    result.seed = seed;
    result.params_train = table_params(model);
    const LossReport report = train(model, ds, tc);
    result.train_logloss = report.logloss;
    result.train_samples = report.sample_count;

    model.collapse_bundles();
    result.params_inference = table_params(model);
    result.full = evaluate(model, ds, test);
    result.most_frequent = evaluate(model, ds, strata.most_frequent);
    result.least_frequent = evaluate(model, ds, strata.least_frequent);

    if (!cfg.out_dir.empty() && cfg.write_checkpoints) {
        const fs::path dir = fs::path(cfg.out_dir) / "checkpoints";
        fs::create_directories(dir);
        const fs::path path = dir / (config_id + "_seed" + std::to_string(seed) + ".bin");
        json snapshot{{"config_id", config_id},
                      {"mode", tuple.mode == BundleKind::Mlet ? "mlet" : "single"},
                      {"d", tuple.d},
                      {"k", tuple.k},
                      {"init_std", tuple.init_std},
                      {"eta", cfg.eta},
                      {"optimizer", optimizer_name(cfg.optimizer)},
                      {"batch_size", cfg.batch_size},
                      {"epochs", cfg.epochs},
                      {"seed", seed},
                      {"dataset_id", ds_id}};
        write_checkpoint(path.string(), model, snapshot.dump());
        result.checkpoint_path = path.string();
    }

    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) {
        s += x;
    }
    return s / static_cast<double>(xs.size());
}

double sd_of(const std::vector<double>& xs) {
    if (xs.size() < 2) {
        return 0.0;
    }
    const double m = mean_of(xs);
    double s = 0.0;
    for (double x : xs) {
        s += (x - m) * (x - m);
    }
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

}  // namespace

std::string make_config_id(BundleKind mode, std::size_t d, std::size_t k,
                           double init_std, Optimizer opt, double eta) {
    std::ostringstream os;
    if (mode == BundleKind::SingleLayer) {
        os << "single_d" << d;
    } else {
        os << "mlet_d" << d << "_k" << k << "_std" << trim_number(init_std);
    }
    os << "_" << optimizer_name(opt) << "_lr" << trim_number(eta);
    return os.str();
}

std::string dataset_id(const SyntheticCtrDataset& ds, const std::string& path) {
    std::ostringstream os;
    if (!path.empty()) {
        os << fs::path(path).filename().string() << ":";
    }
    os << "seed" << ds.seed();
    for (const auto& f : ds.spec().fields) {
        os << "_n" << f.categories << "a" << trim_number(f.zipf_alpha);
    }
    os << "_tr" << ds.spec().train_count;
    return os.str();
}

std::size_t thread_budget(std::size_t cells) {
    std::size_t budget = 0;
    if (const char* env = std::getenv("MLET_THREADS")) {
        budget = static_cast<std::size_t>(std::strtoul(env, nullptr, 10));
    }
    if (budget == 0) {
        budget = std::max<unsigned>(1, std::thread::hardware_concurrency());
    }
    return std::max<std::size_t>(1, std::min(budget, std::max<std::size_t>(1, cells)));
}

std::vector<RunRecord> run_sweep(const SweepConfig& config,
                                 const SyntheticCtrDataset& ds) {
    const std::vector<CfgTuple> tuples = expand_configs(config);
    const std::vector<std::size_t> test = test_ids(ds);
    const Strata strata = stratify(ds, config.stratify_fraction);
    const std::string ds_id = dataset_id(ds, config.dataset_path);

    std::vector<RunRecord> records(tuples.size());
    for (std::size_t c = 0; c < tuples.size(); ++c) {
        RunRecord& rec = records[c];
        rec.config_id = make_config_id(tuples[c].mode, tuples[c].d, tuples[c].k,
                                       tuples[c].init_std, config.optimizer, config.eta);
        rec.mode = tuples[c].mode;
        rec.d = tuples[c].d;
        rec.k = tuples[c].k;
        rec.init_std = tuples[c].init_std;
        rec.eta = config.eta;
        rec.optimizer = config.optimizer;
        rec.batch_size = config.batch_size;
        rec.epochs = config.epochs;
        rec.dataset_id = ds_id;
        rec.seeds.resize(config.seeds.size());
    }

    // Work queue over (configuration, seed) cells. Every cell writes into
    // its own slot, so results are identical for any thread count.
    struct Cell {
        std::size_t cfg;
        std::size_t seed_idx;
    };
    std::vector<Cell> cells;
    for (std::size_t c = 0; c < tuples.size(); ++c) {
        for (std::size_t s = 0; s < config.seeds.size(); ++s) {
            cells.push_back({c, s});
        }
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string failure;
    std::mutex failure_mutex;
    const std::size_t workers = thread_budget(cells.size());
    auto work = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size() || failed.load()) {
                return;
            }
            const Cell cell = cells[i];
            try {
                records[cell.cfg].seeds[cell.seed_idx] =
                    run_cell(config, ds, tuples[cell.cfg], config.seeds[cell.seed_idx],
                             test, strata, records[cell.cfg].config_id, ds_id);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                failed.store(true);
                if (failure.empty()) {
                    failure = records[cell.cfg].config_id + " seed " +
                              std::to_string(config.seeds[cell.seed_idx]) + ": " +
                              e.what();
                }
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(workers);
        for (std::size_t t = 0; t < workers; ++t) {
            threads.emplace_back(work);
        }
        for (auto& t : threads) {
            t.join();
        }
    }
    if (failed.load()) {
        throw std::runtime_error("sweep cell failed: " + failure);
    }

    if (!config.out_dir.empty()) {
        fs::create_directories(fs::path(config.out_dir) / "runs");
        std::ofstream os(fs::path(config.out_dir) / "config.json");
        os << sweep_config_to_json(config) << "\n";
        for (const RunRecord& rec : records) {
            write_run_record(rec, (fs::path(config.out_dir) / "runs").string());
        }
    }
    return records;
}

namespace {

json record_to_json(const RunRecord& rec) {
    json seeds = json::array();
    for (const SeedResult& s : rec.seeds) {
        seeds.push_back({{"seed", s.seed},
                         {"full", eval_to_json(s.full)},
                         {"most_frequent", eval_to_json(s.most_frequent)},
                         {"least_frequent", eval_to_json(s.least_frequent)},
                         {"train_logloss", s.train_logloss},
                         {"train_samples", s.train_samples},
                         {"wall_seconds", s.wall_seconds},
                         {"params_train", s.params_train},
                         {"params_inference", s.params_inference},
                         {"checkpoint", s.checkpoint_path}});
    }
    return json{{"config_id", rec.config_id},
                {"mode", rec.mode == BundleKind::Mlet ? "mlet" : "single"},
                {"d", rec.d},
                {"k", rec.k},
                {"init_std", rec.init_std},
                {"eta", rec.eta},
                {"optimizer", optimizer_name(rec.optimizer)},
                {"batch_size", rec.batch_size},
                {"epochs", rec.epochs},
                {"dataset_id", rec.dataset_id},
                {"seeds", seeds}};
}

RunRecord record_from_json(const json& j) {
    RunRecord rec;
    rec.config_id = j.at("config_id").get<std::string>();
    rec.mode = j.at("mode").get<std::string>() == "mlet" ? BundleKind::Mlet
                                                         : BundleKind::SingleLayer;
    rec.d = j.at("d").get<std::size_t>();
    rec.k = j.at("k").get<std::size_t>();
    rec.init_std = j.at("init_std").get<double>();
    rec.eta = j.at("eta").get<double>();
    rec.optimizer = optimizer_from_name(j.at("optimizer").get<std::string>());
    rec.batch_size = j.at("batch_size").get<std::size_t>();
    rec.epochs = j.at("epochs").get<std::size_t>();
    rec.dataset_id = j.at("dataset_id").get<std::string>();
    for (const auto& s : j.at("seeds")) {
        SeedResult sr;
        sr.seed = s.at("seed").get<std::uint64_t>();
        sr.full = eval_from_json(s.at("full"));
        sr.most_frequent = eval_from_json(s.at("most_frequent"));
        sr.least_frequent = eval_from_json(s.at("least_frequent"));
        sr.train_logloss = s.at("train_logloss").get<double>();
        sr.train_samples = s.at("train_samples").get<std::size_t>();
        sr.wall_seconds = s.at("wall_seconds").get<double>();
        sr.params_train = s.at("params_train").get<std::size_t>();
        sr.params_inference = s.at("params_inference").get<std::size_t>();
        sr.checkpoint_path = s.value("checkpoint", "");
        rec.seeds.push_back(std::move(sr));
    }
    return rec;
}

}  // namespace

void write_run_record(const RunRecord& record, const std::string& dir) {
    fs::create_directories(dir);
    const fs::path path = fs::path(dir) / (record.config_id + ".json");
    std::ofstream os(path);
    if (!os) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    os << record_to_json(record).dump(2) << "\n";
}

RunRecord read_run_record(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw IoError("cannot open " + path);
    }
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw IoError(path + ": " + e.what());
    }
    return record_from_json(j);
}

std::vector<RunRecord> load_run_records(const std::vector<std::string>& dirs) {
    std::vector<std::string> paths;
    for (const auto& dir : dirs) {
        if (!fs::exists(dir)) {
            throw IoError("no such run directory: " + dir);
        }
        if (fs::is_regular_file(dir)) {
            paths.push_back(dir);
            continue;
        }
        for (const auto& entry : fs::recursive_directory_iterator(dir)) {
            if (entry.is_regular_file() && entry.path().extension() == ".json" &&
                entry.path().filename() != "config.json" &&
                entry.path().filename() != "report.json") {
                paths.push_back(entry.path().string());
            }
        }
    }
    std::sort(paths.begin(), paths.end());
    std::vector<RunRecord> records;
    for (const auto& p : paths) {
        records.push_back(read_run_record(p));
    }
    if (records.empty()) {
        throw ValueError("no run records found");
    }
    return records;
}

Report build_report(const std::vector<RunRecord>& records) {
    if (records.empty()) {
        throw ValueError("report needs at least one run record");
    }
    for (const RunRecord& rec : records) {
        if (rec.dataset_id != records.front().dataset_id) {
            throw ValueError("mixed incompatible configs: dataset " + rec.dataset_id +
                             " vs " + records.front().dataset_id);
        }
        if (rec.seeds.empty()) {
            throw ValueError("record " + rec.config_id + " has no seeds");
        }
    }

    Report report;
    for (const RunRecord& rec : records) {
        ReportRow row;
        row.config_id = rec.config_id;
        row.mode = rec.mode;
        row.d = rec.d;
        row.k = rec.k;
        row.init_std = rec.init_std;
        row.eta = rec.eta;
        row.optimizer = rec.optimizer;
        row.batch_size = rec.batch_size;
        row.epochs = rec.epochs;
        row.seed_count = rec.seeds.size();

        auto collect = [&](auto getter) {
            std::vector<double> xs;
            xs.reserve(rec.seeds.size());
            for (const SeedResult& s : rec.seeds) {
                xs.push_back(getter(s));
            }
            return xs;
        };
        const auto auc = collect([](const SeedResult& s) { return s.full.auc; });
        const auto pr = collect([](const SeedResult& s) { return s.full.pr_auc; });
        const auto ll = collect([](const SeedResult& s) { return s.full.logloss; });
        row.auc_mean = mean_of(auc);
        row.auc_sd = sd_of(auc);
        row.pr_auc_mean = mean_of(pr);
        row.pr_auc_sd = sd_of(pr);
        row.logloss_mean = mean_of(ll);
        row.logloss_sd = sd_of(ll);
        row.auc_most_mean =
            mean_of(collect([](const SeedResult& s) { return s.most_frequent.auc; }));
        row.auc_least_mean =
            mean_of(collect([](const SeedResult& s) { return s.least_frequent.auc; }));
        row.pr_auc_most_mean =
            mean_of(collect([](const SeedResult& s) { return s.most_frequent.pr_auc; }));
        row.pr_auc_least_mean =
            mean_of(collect([](const SeedResult& s) { return s.least_frequent.pr_auc; }));
        row.logloss_most_mean =
            mean_of(collect([](const SeedResult& s) { return s.most_frequent.logloss; }));
        row.logloss_least_mean = mean_of(
            collect([](const SeedResult& s) { return s.least_frequent.logloss; }));
        row.train_logloss_mean =
            mean_of(collect([](const SeedResult& s) { return s.train_logloss; }));
        row.wall_seconds_mean =
            mean_of(collect([](const SeedResult& s) { return s.wall_seconds; }));
        row.params_train = rec.seeds.front().params_train;
        row.params_inference = rec.seeds.front().params_inference;
        report.rows.push_back(std::move(row));
    }
    std::sort(report.rows.begin(), report.rows.end(),
              [](const ReportRow& a, const ReportRow& b) {
                  return a.config_id < b.config_id;
              });

    // Iso-quality memory reduction: for each single-layer baseline, the
    // smallest MLET d whose mean AUC reaches the baseline's.
    for (const ReportRow& base : report.rows) {
        if (base.mode != BundleKind::SingleLayer) {
            continue;
        }
        IsoQualityRow iso;
        iso.baseline_id = base.config_id;
        iso.baseline_d = base.d;
        for (const ReportRow& cand : report.rows) {
            if (cand.mode != BundleKind::Mlet || cand.auc_mean < base.auc_mean) {
                continue;
            }
            if (!iso.matched || cand.d < iso.matched_d ||
                (cand.d == iso.matched_d && cand.k < iso.matched_k)) {
                iso.matched = true;
                iso.matched_id = cand.config_id;
                iso.matched_d = cand.d;
                iso.matched_k = cand.k;
            }
        }
        if (iso.matched) {
            iso.reduction =
                static_cast<double>(base.d) / static_cast<double>(iso.matched_d);
        }
        report.iso_quality.push_back(std::move(iso));
    }

    // Rare-vs-frequent PR-AUC deltas against the same-d baseline.
    for (const ReportRow& row : report.rows) {
        if (row.mode != BundleKind::Mlet) {
            continue;
        }
        for (const ReportRow& base : report.rows) {
            if (base.mode != BundleKind::SingleLayer || base.d != row.d) {
                continue;
            }
            RareFrequentRow rf;
            rf.mlet_id = row.config_id;
            rf.baseline_id = base.config_id;
            rf.delta_pr_auc_least = row.pr_auc_least_mean - base.pr_auc_least_mean;
            rf.delta_pr_auc_most = row.pr_auc_most_mean - base.pr_auc_most_mean;
            rf.rare_gain_ge_frequent = rf.delta_pr_auc_least >= rf.delta_pr_auc_most;
            report.rare_frequent.push_back(std::move(rf));
        }
    }
    return report;
}

void write_report_csv(const Report& report, const std::string& path) {
    std::ofstream os(path);
    if (!os) {
        throw IoError("cannot open " + path + " for writing");
    }
    os << "config_id,mode,d,k,init_std,optimizer,eta,batch_size,epochs,seeds,"
          "auc_mean,auc_sd,pr_auc_mean,pr_auc_sd,logloss_mean,logloss_sd,"
          "auc_most_mean,auc_least_mean,pr_auc_most_mean,pr_auc_least_mean,"
          "logloss_most_mean,logloss_least_mean,train_logloss_mean,"
          "wall_seconds_mean,params_train,params_inference\n";
    os.precision(10);
    for (const ReportRow& r : report.rows) {
        os << r.config_id << ',' << (r.mode == BundleKind::Mlet ? "mlet" : "single")
           << ',' << r.d << ',' << r.k << ',' << r.init_std << ','
           << optimizer_name(r.optimizer) << ',' << r.eta << ',' << r.batch_size << ','
           << r.epochs << ',' << r.seed_count << ',' << r.auc_mean << ',' << r.auc_sd
           << ',' << r.pr_auc_mean << ',' << r.pr_auc_sd << ',' << r.logloss_mean << ','
           << r.logloss_sd << ',' << r.auc_most_mean << ',' << r.auc_least_mean << ','
           << r.pr_auc_most_mean << ',' << r.pr_auc_least_mean << ','
           << r.logloss_most_mean << ',' << r.logloss_least_mean << ','
           << r.train_logloss_mean << ',' << r.wall_seconds_mean << ','
           << r.params_train << ',' << r.params_inference << "\n";
    }
}

void write_report_json(const Report& report, const std::string& path) {
    json rows = json::array();
    for (const ReportRow& r : report.rows) {
        rows.push_back({{"config_id", r.config_id},
                        {"mode", r.mode == BundleKind::Mlet ? "mlet" : "single"},
                        {"d", r.d},
                        {"k", r.k},
                        {"init_std", r.init_std},
                        {"optimizer", optimizer_name(r.optimizer)},
                        {"eta", r.eta},
                        {"batch_size", r.batch_size},
                        {"epochs", r.epochs},
                        {"seeds", r.seed_count},
                        {"auc_mean", r.auc_mean},
                        {"auc_sd", r.auc_sd},
                        {"pr_auc_mean", r.pr_auc_mean},
                        {"pr_auc_sd", r.pr_auc_sd},
                        {"logloss_mean", r.logloss_mean},
                        {"logloss_sd", r.logloss_sd},
                        {"auc_most_mean", r.auc_most_mean},
                        {"auc_least_mean", r.auc_least_mean},
                        {"pr_auc_most_mean", r.pr_auc_most_mean},
                        {"pr_auc_least_mean", r.pr_auc_least_mean},
                        {"logloss_most_mean", r.logloss_most_mean},
                        {"logloss_least_mean", r.logloss_least_mean},
                        {"train_logloss_mean", r.train_logloss_mean},
                        {"wall_seconds_mean", r.wall_seconds_mean},
                        {"params_train", r.params_train},
                        {"params_inference", r.params_inference}});
    }
    json iso = json::array();
    for (const IsoQualityRow& r : report.iso_quality) {
        iso.push_back({{"baseline_id", r.baseline_id},
                       {"baseline_d", r.baseline_d},
                       {"matched", r.matched},
                       {"matched_id", r.matched_id},
                       {"matched_d", r.matched_d},
                       {"matched_k", r.matched_k},
                       {"reduction", r.reduction}});
    }
    json rare = json::array();
    for (const RareFrequentRow& r : report.rare_frequent) {
        rare.push_back({{"mlet_id", r.mlet_id},
                        {"baseline_id", r.baseline_id},
                        {"delta_pr_auc_least", r.delta_pr_auc_least},
                        {"delta_pr_auc_most", r.delta_pr_auc_most},
                        {"rare_gain_ge_frequent", r.rare_gain_ge_frequent}});
    }
    std::ofstream os(path);
    if (!os) {
        throw IoError("cannot open " + path + " for writing");
    }
    os << json{{"rows", rows}, {"iso_quality", iso}, {"rare_frequent", rare}}.dump(2)
       << "\n";
}

std::string sweep_config_to_json(const SweepConfig& c) {
    json fields = json::array();
    for (const auto& f : c.dataset_spec.fields) {
        fields.push_back({{"categories", f.categories}, {"alpha", f.zipf_alpha}});
    }
    std::vector<std::string> modes;
    for (BundleKind m : c.modes) {
        modes.push_back(m == BundleKind::Mlet ? "mlet" : "single");
    }
    json hashes = json::array();
    for (const auto& [field, buckets] : c.hashes) {
        hashes.push_back({{"field", field}, {"buckets", buckets}});
    }
    json j{{"dataset_path", c.dataset_path},
           {"dataset_seed", c.dataset_seed},
           {"dataset_spec",
            {{"fields", fields},
             {"dense_dim", c.dataset_spec.dense_dim},
             {"train", c.dataset_spec.train_count},
             {"val", c.dataset_spec.val_count},
             {"test", c.dataset_spec.test_count},
             {"noise_std", c.dataset_spec.noise_std},
             {"interaction_scale", c.dataset_spec.interaction_scale},
             {"latent_dim", c.dataset_spec.latent_dim},
             {"latent_groups", c.dataset_spec.latent_groups},
             {"group_noise", c.dataset_spec.group_noise},
             {"freq_label_bias", c.dataset_spec.freq_label_bias}}},
           {"modes", modes},
           {"d_list", c.d_list},
           {"k_list", c.k_list},
           {"init_stds", c.init_stds},
           {"seeds", c.seeds},
           {"eta", c.eta},
           {"optimizer", optimizer_name(c.optimizer)},
           {"adagrad_epsilon", c.adagrad_epsilon},
           {"batch_size", c.batch_size},
           {"epochs", c.epochs},
           {"hashes", hashes},
           {"out_dir", c.out_dir},
           {"write_checkpoints", c.write_checkpoints},
           {"stratify_fraction", c.stratify_fraction}};
    return j.dump(2);
}

SweepConfig sweep_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw IoError(std::string("bad sweep config: ") + e.what());
    }
    SweepConfig c;
    c.dataset_path = j.value("dataset_path", c.dataset_path);
    c.dataset_seed = j.value("dataset_seed", c.dataset_seed);
    if (j.contains("dataset_spec")) {
        const json& s = j.at("dataset_spec");
        if (s.contains("fields")) {
            c.dataset_spec.fields.clear();
            for (const auto& f : s.at("fields")) {
                c.dataset_spec.fields.push_back({f.at("categories").get<std::size_t>(),
                                                 f.at("alpha").get<double>()});
            }
        }
        c.dataset_spec.dense_dim = s.value("dense_dim", c.dataset_spec.dense_dim);
        c.dataset_spec.train_count = s.value("train", c.dataset_spec.train_count);
        c.dataset_spec.val_count = s.value("val", c.dataset_spec.val_count);
        c.dataset_spec.test_count = s.value("test", c.dataset_spec.test_count);
        c.dataset_spec.noise_std = s.value("noise_std", c.dataset_spec.noise_std);
        c.dataset_spec.interaction_scale =
            s.value("interaction_scale", c.dataset_spec.interaction_scale);
        c.dataset_spec.latent_dim = s.value("latent_dim", c.dataset_spec.latent_dim);
        c.dataset_spec.latent_groups =
            s.value("latent_groups", c.dataset_spec.latent_groups);
        c.dataset_spec.group_noise = s.value("group_noise", c.dataset_spec.group_noise);
        c.dataset_spec.freq_label_bias =
            s.value("freq_label_bias", c.dataset_spec.freq_label_bias);
    }
    if (j.contains("modes")) {
        c.modes.clear();
        for (const auto& m : j.at("modes")) {
            const std::string name = m.get<std::string>();
            if (name == "single") {
                c.modes.push_back(BundleKind::SingleLayer);
            } else if (name == "mlet") {
                c.modes.push_back(BundleKind::Mlet);
            } else {
                throw ValueError("unknown mode: " + name);
            }
        }
    }
    if (j.contains("d_list")) {
        c.d_list = j.at("d_list").get<std::vector<std::size_t>>();
    }
    if (j.contains("k_list")) {
        c.k_list = j.at("k_list").get<std::vector<std::size_t>>();
    }
    if (j.contains("init_stds")) {
        c.init_stds = j.at("init_stds").get<std::vector<double>>();
    }
    if (j.contains("seeds")) {
        c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    }
    c.eta = j.value("eta", c.eta);
    if (j.contains("optimizer")) {
        c.optimizer = optimizer_from_name(j.at("optimizer").get<std::string>());
    }
    c.adagrad_epsilon = j.value("adagrad_epsilon", c.adagrad_epsilon);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    if (j.contains("hashes")) {
        c.hashes.clear();
        for (const auto& h : j.at("hashes")) {
            c.hashes.emplace_back(h.at("field").get<std::size_t>(),
                                  h.at("buckets").get<std::size_t>());
        }
    }
    c.out_dir = j.value("out_dir", c.out_dir);
    c.write_checkpoints = j.value("write_checkpoints", c.write_checkpoints);
    c.stratify_fraction = j.value("stratify_fraction", c.stratify_fraction);
    return c;
}

namespace {

constexpr std::uint8_t kSchemeRaw = 0;
constexpr std::uint8_t kSchemeLowRank = 1;
constexpr std::uint8_t kSchemeInt8 = 2;
constexpr std::uint8_t kSchemeLowRankInt8 = 3;

}  // namespace

CompressOutcome compress_checkpoint(const std::string& checkpoint_path,
                                    const CompressOptions& options,
                                    const SyntheticCtrDataset& ds,
                                    const std::string& out_path) {
    Checkpoint ck = read_checkpoint(checkpoint_path);
    ck.model.collapse_bundles();

    CompressOutcome outcome;
    outcome.out_path = out_path;
    for (const auto& b : ck.model.bundles()) {
        outcome.table_bytes_before += bundle_bytes(b);
    }

    std::ofstream os(out_path, std::ios::binary);
    if (!os) {
        throw IoError("cannot open " + out_path + " for writing");
    }
    write_magic(os, "MLETCKQ1");
    write_u32_le(os, static_cast<std::uint32_t>(ck.config_json.size()));
    os.write(ck.config_json.data(),
             static_cast<std::streamsize>(ck.config_json.size()));
    write_u32_le(os, static_cast<std::uint32_t>(ck.model.bundles().size()));

    std::vector<EmbeddingBundle> eval_bundles;
    for (const auto& b : ck.model.bundles()) {
        const Matrix& w = b.table();
        const auto before = os.tellp();
        Matrix reconstructed = w;
        if (options.svd_rank && options.int8) {
            const LowRankFactors lr = low_rank_approx(w, *options.svd_rank);
            const QuantizedTable ql = quantize_int8(lr.left);
            const QuantizedTable qr = quantize_int8(lr.right);
            write_u8(os, kSchemeLowRankInt8);
            write_quantized(os, ql);
            write_quantized(os, qr);
            reconstructed = matmul(dequantize(ql), dequantize(qr));
        } else if (options.svd_rank) {
            const LowRankFactors lr = low_rank_approx(w, *options.svd_rank);
            write_u8(os, kSchemeLowRank);
            write_matrix(os, lr.left);
            write_matrix(os, lr.right);
            reconstructed = lr.reconstructed;
        } else if (options.int8) {
            const QuantizedTable q = quantize_int8(w);
            write_u8(os, kSchemeInt8);
            write_quantized(os, q);
            reconstructed = dequantize(q);
        } else {
            write_u8(os, kSchemeRaw);
            write_bundle(os, b);
        }
        outcome.table_bytes_after +=
            static_cast<std::size_t>(os.tellp() - before);
        eval_bundles.push_back(EmbeddingBundle::single(std::move(reconstructed)));
    }
    write_u8(os, ck.model.has_dense() ? 1 : 0);
    if (ck.model.has_dense()) {
        write_matrix(os, ck.model.dense_weights());
    }
    write_u64_le(os, ck.model.top_weights().size());
    for (double x : ck.model.top_weights()) {
        write_f64_le(os, x);
    }
    if (!os) {
        throw IoError("write failed: " + out_path);
    }
    os.close();

    CtrModel eval_model = CtrModel::from_parts(
        ck.model.config(), std::move(eval_bundles), ck.model.dense_weights(),
        ck.model.top_weights());
    outcome.eval = evaluate(eval_model, ds, test_ids(ds));
    return outcome;
}

Checkpoint read_compressed_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("cannot open " + path);
    }
    expect_magic(is, "MLETCKQ1");
    const std::uint32_t json_len = read_u32_le(is);
    std::string config_json(json_len, '\0');
    is.read(config_json.data(), json_len);
    if (static_cast<std::uint32_t>(is.gcount()) != json_len) {
        throw IoError("truncated compressed checkpoint");
    }
    const std::uint32_t n_bundles = read_u32_le(is);
    std::vector<EmbeddingBundle> bundles;
    for (std::uint32_t i = 0; i < n_bundles; ++i) {
        const std::uint8_t scheme = read_u8(is);
        switch (scheme) {
            case kSchemeRaw:
                bundles.push_back(read_bundle(is));
                break;
            case kSchemeLowRank: {
                Matrix left = read_matrix(is);
                Matrix right = read_matrix(is);
                bundles.push_back(EmbeddingBundle::single(matmul(left, right)));
                break;
            }
            case kSchemeInt8:
                bundles.push_back(EmbeddingBundle::single(dequantize(read_quantized(is))));
                break;
            case kSchemeLowRankInt8: {
                const QuantizedTable ql = read_quantized(is);
                const QuantizedTable qr = read_quantized(is);
                bundles.push_back(
                    EmbeddingBundle::single(matmul(dequantize(ql), dequantize(qr))));
                break;
            }
            default:
                throw IoError("unknown compression scheme tag");
        }
    }
    const bool dense = read_u8(is) != 0;
    Matrix dense_w;
    if (dense) {
        dense_w = read_matrix(is);
    }
    const std::uint64_t n_top = read_u64_le(is);
    std::vector<double> top(n_top);
    for (double& x : top) {
        x = read_f64_le(is);
    }

    ModelConfig cfg;
    cfg.d = bundles.empty() ? 0 : bundles[0].d();
    for (const auto& b : bundles) {
        cfg.categories.push_back(b.n());
    }
    cfg.dense_dim = dense ? dense_w.cols() : 0;
    return Checkpoint{CtrModel::from_parts(std::move(cfg), std::move(bundles),
                                           std::move(dense_w), std::move(top)),
                      std::move(config_json)};
}

}  // namespace mlet
