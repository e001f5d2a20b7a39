#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "mlet/experiment.hpp"
#include "mlet/errors.hpp"

using namespace mlet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("mlet_exp_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

DatasetSpec tiny_spec() {
    DatasetSpec spec;
    spec.fields = {{30, 1.2}, {30, 1.2}};
    spec.dense_dim = 2;
    spec.train_count = 2000;
    spec.val_count = 200;
    spec.test_count = 400;
    spec.latent_dim = 4;
    spec.latent_groups = 8;
    return spec;
}

SweepConfig tiny_sweep(const std::string& out_dir) {
    SweepConfig cfg;
    cfg.dataset_spec = tiny_spec();
    cfg.dataset_seed = 99;
    cfg.modes = {BundleKind::SingleLayer, BundleKind::Mlet};
    cfg.d_list = {4};
    cfg.k_list = {8};
    cfg.init_stds = {0.25};
    cfg.seeds = {1, 2};
    cfg.eta = 0.1;
    cfg.batch_size = 64;
    cfg.out_dir = out_dir;
    return cfg;
}

}  // namespace

TEST_CASE("config ids are stable and readable") {
    CHECK(make_config_id(BundleKind::SingleLayer, 8, 0, 0.0, Optimizer::Sgd, 0.2) ==
          "single_d8_sgd_lr0.2");
    CHECK(make_config_id(BundleKind::Mlet, 8, 32, 0.25, Optimizer::Adagrad, 0.02) ==
          "mlet_d8_k32_std0.25_adagrad_lr0.02");
}

TEST_CASE("run_sweep produces records, files and deterministic metrics") {
    const SyntheticCtrDataset ds = generate_dataset(tiny_spec(), 99);
    TempDir dir;
    const SweepConfig cfg = tiny_sweep(dir.str());

    const auto records = run_sweep(cfg, ds);
    REQUIRE(records.size() == 2);  // single_d4 and mlet_d4_k8
    for (const auto& rec : records) {
        REQUIRE(rec.seeds.size() == 2);
        for (const auto& s : rec.seeds) {
            CHECK(s.full.auc > 0.0);
            CHECK(s.full.auc <= 1.0);
            CHECK(s.train_samples == 2000);
            CHECK(fs::exists(s.checkpoint_path));
        }
    }
    CHECK(fs::exists(dir.file("config.json")));
    CHECK(fs::exists(dir.path / "runs" / (records[0].config_id + ".json")));

    // Parameter accounting: MLET trains more but serves the same.
    const RunRecord* mlet = nullptr;
    const RunRecord* single = nullptr;
    for (const auto& rec : records) {
        (rec.mode == BundleKind::Mlet ? mlet : single) = &rec;
    }
    REQUIRE(mlet != nullptr);
    REQUIRE(single != nullptr);
    CHECK(mlet->seeds[0].params_train > single->seeds[0].params_train);
    CHECK(mlet->seeds[0].params_inference == single->seeds[0].params_inference);
    // Collapsed inference storage is sum_f d * n_f, independent of k.
    CHECK(mlet->seeds[0].params_inference == 4 * 30 + 4 * 30);
    CHECK(mlet->seeds[0].params_train == 2 * (4 * 8 + 8 * 30));

    // Same sweep again: byte-identical metrics.
    TempDir dir2;
    SweepConfig cfg2 = tiny_sweep(dir2.str());
    const auto again = run_sweep(cfg2, ds);
    for (std::size_t r = 0; r < records.size(); ++r) {
        for (std::size_t s = 0; s < records[r].seeds.size(); ++s) {
            CHECK(records[r].seeds[s].full.auc == again[r].seeds[s].full.auc);
            CHECK(records[r].seeds[s].full.logloss == again[r].seeds[s].full.logloss);
            CHECK(records[r].seeds[s].least_frequent.pr_auc ==
                  again[r].seeds[s].least_frequent.pr_auc);
        }
    }
}

TEST_CASE("run records round-trip through JSON files") {
    const SyntheticCtrDataset ds = generate_dataset(tiny_spec(), 99);
    TempDir dir;
    SweepConfig cfg = tiny_sweep(dir.str());
    cfg.modes = {BundleKind::SingleLayer};
    cfg.seeds = {1};
    const auto records = run_sweep(cfg, ds);
    const RunRecord back = read_run_record(
        (dir.path / "runs" / (records[0].config_id + ".json")).string());
    CHECK(back.config_id == records[0].config_id);
    CHECK(back.d == records[0].d);
    CHECK(back.seeds.size() == 1);
    CHECK(back.seeds[0].full.auc == records[0].seeds[0].full.auc);
    CHECK(back.seeds[0].full.n_pos == records[0].seeds[0].full.n_pos);
    CHECK(back.dataset_id == records[0].dataset_id);
}

TEST_CASE("report averages seeds and matches an independent recomputation") {
    const SyntheticCtrDataset ds = generate_dataset(tiny_spec(), 99);
    TempDir dir;
    const SweepConfig cfg = tiny_sweep(dir.str());
    run_sweep(cfg, ds);

    const auto records = load_run_records({dir.str()});
    REQUIRE(records.size() == 2);
    const Report report = build_report(records);
    REQUIRE(report.rows.size() == 2);

    // Independent recomputation straight from the JSON files.
    for (const auto& row : report.rows) {
        const auto path = dir.path / "runs" / (row.config_id + ".json");
        std::ifstream is(path);
        REQUIRE(is);
        nlohmann::json j;
        is >> j;
        double auc_sum = 0.0;
        double ll_sum = 0.0;
        std::size_t count = 0;
        for (const auto& s : j.at("seeds")) {
            auc_sum += s.at("full").at("auc").get<double>();
            ll_sum += s.at("full").at("logloss").get<double>();
            ++count;
        }
        CHECK(row.seed_count == count);
        CHECK(row.auc_mean ==
              doctest::Approx(auc_sum / count).epsilon(1e-14));
        CHECK(row.logloss_mean ==
              doctest::Approx(ll_sum / count).epsilon(1e-14));
    }

    // Two seeds with identical metrics average to that value.
    RunRecord twin = records[0];
    twin.seeds = {records[0].seeds[0], records[0].seeds[0]};
    twin.seeds[1].seed = 999;
    const Report twin_report = build_report({twin});
    CHECK(twin_report.rows[0].auc_mean == records[0].seeds[0].full.auc);
    CHECK(twin_report.rows[0].auc_sd == 0.0);
}

TEST_CASE("report rejects mixed datasets") {
    const SyntheticCtrDataset ds = generate_dataset(tiny_spec(), 99);
    TempDir dir;
    SweepConfig cfg = tiny_sweep(dir.str());
    cfg.modes = {BundleKind::SingleLayer};
    cfg.seeds = {1};
    auto records = run_sweep(cfg, ds);
    RunRecord other = records[0];
    other.config_id = "other";
    other.dataset_id = "something_else";
    records.push_back(other);
    CHECK_THROWS_AS(build_report(records), ValueError);
}

TEST_CASE("iso-quality picks the smallest adequate MLET dimension") {
    RunRecord base;
    base.config_id = "single_d32";
    base.mode = BundleKind::SingleLayer;
    base.d = 32;
    base.dataset_id = "ds";
    SeedResult s;
    s.full.auc = 0.80;
    base.seeds = {s};

    auto mlet_row = [&](std::size_t d, std::size_t k, double auc) {
        RunRecord r;
        r.config_id = "mlet_d" + std::to_string(d) + "_k" + std::to_string(k);
        r.mode = BundleKind::Mlet;
        r.d = d;
        r.k = k;
        r.dataset_id = "ds";
        SeedResult sr;
        sr.full.auc = auc;
        r.seeds = {sr};
        return r;
    };

    const Report report = build_report(
        {base, mlet_row(16, 64, 0.81), mlet_row(8, 128, 0.805), mlet_row(4, 128, 0.79)});
    REQUIRE(report.iso_quality.size() == 1);
    const IsoQualityRow& iso = report.iso_quality[0];
    CHECK(iso.matched);
    CHECK(iso.matched_d == 8);  // d=4 misses the bar, d=8 reaches it
    CHECK(iso.reduction == doctest::Approx(4.0));
}

TEST_CASE("csv report has the documented stable header") {
    const SyntheticCtrDataset ds = generate_dataset(tiny_spec(), 99);
    TempDir dir;
    SweepConfig cfg = tiny_sweep(dir.str());
    cfg.modes = {BundleKind::SingleLayer};
    cfg.seeds = {1};
    const auto records = run_sweep(cfg, ds);
    const Report report = build_report(records);
    write_report_csv(report, dir.file("report.csv"));
    write_report_json(report, dir.file("report.json"));

    std::ifstream is(dir.file("report.csv"));
    std::string header;
    std::getline(is, header);
    CHECK(header ==
          "config_id,mode,d,k,init_std,optimizer,eta,batch_size,epochs,seeds,"
          "auc_mean,auc_sd,pr_auc_mean,pr_auc_sd,logloss_mean,logloss_sd,"
          "auc_most_mean,auc_least_mean,pr_auc_most_mean,pr_auc_least_mean,"
          "logloss_most_mean,logloss_least_mean,train_logloss_mean,"
          "wall_seconds_mean,params_train,params_inference");
    std::string row;
    std::getline(is, row);
    CHECK(row.find("single_d4") == 0);
}

TEST_CASE("sweep config JSON round-trips and honors overrides") {
    SweepConfig cfg = tiny_sweep("/tmp/out");
    cfg.hashes = {{0, 15}};
    cfg.optimizer = Optimizer::Adagrad;
    const std::string text = sweep_config_to_json(cfg);
    const SweepConfig back = sweep_config_from_json(text);
    CHECK(back.d_list == cfg.d_list);
    CHECK(back.k_list == cfg.k_list);
    CHECK(back.seeds == cfg.seeds);
    CHECK(back.eta == cfg.eta);
    CHECK(back.optimizer == Optimizer::Adagrad);
    CHECK(back.hashes == cfg.hashes);
    CHECK(back.dataset_spec.fields[0].categories == 30);
    CHECK(back.out_dir == "/tmp/out");

    // Partial JSON keeps defaults for everything absent.
    const SweepConfig partial = sweep_config_from_json(R"({"eta": 0.5})");
    CHECK(partial.eta == 0.5);
    CHECK(partial.batch_size == 128);
    CHECK(partial.seeds == std::vector<std::uint64_t>{1, 2, 3});
}

TEST_CASE("compress pipeline: svd, int8 and size accounting") {
    const SyntheticCtrDataset ds = generate_dataset(tiny_spec(), 99);
    TempDir dir;
    SweepConfig cfg = tiny_sweep(dir.str());
    cfg.modes = {BundleKind::Mlet};
    cfg.seeds = {1};
    const auto records = run_sweep(cfg, ds);
    const std::string ckpt = records[0].seeds[0].checkpoint_path;
    REQUIRE(fs::exists(ckpt));

    // Checkpoints hold the collapsed model: no k-dependent storage.
    const Checkpoint loaded = read_checkpoint(ckpt);
    for (const auto& b : loaded.model.bundles()) {
        CHECK(b.kind() == BundleKind::SingleLayer);
    }

    SUBCASE("full-rank svd is a metric no-op") {
        CompressOptions opt;
        opt.svd_rank = 4;  // == d, full rank
        const CompressOutcome out =
            compress_checkpoint(ckpt, opt, ds, dir.file("svd.bin"));
        const EvalResult plain = [&] {
            Checkpoint base = read_checkpoint(ckpt);
            base.model.collapse_bundles();
            return evaluate(base.model, ds, test_ids(ds));
        }();
        CHECK(std::abs(out.eval.auc - plain.auc) <= 1e-9);
        CHECK(std::abs(out.eval.logloss - plain.logloss) <= 1e-9);
    }

    SUBCASE("int8 shrinks tables roughly 8x and stays evaluable") {
        CompressOptions opt;
        opt.int8 = true;
        const CompressOutcome out =
            compress_checkpoint(ckpt, opt, ds, dir.file("q8.bin"));
        // Headers weigh in at this tiny table size; the ratio approaches
        // 8x as d*n grows (the acceptance suite checks that at full size).
        const double ratio = static_cast<double>(out.table_bytes_before) /
                             static_cast<double>(out.table_bytes_after);
        CHECK(ratio > 6.0);
        CHECK(ratio < 8.5);
        CHECK(out.eval.auc > 0.5);

        const Checkpoint back = read_compressed_checkpoint(dir.file("q8.bin"));
        const EvalResult reread = evaluate(back.model, ds, test_ids(ds));
        CHECK(reread.auc == out.eval.auc);
    }

    SUBCASE("combined svd + int8 writes quantized factors") {
        CompressOptions opt;
        opt.svd_rank = 2;
        opt.int8 = true;
        const CompressOutcome out =
            compress_checkpoint(ckpt, opt, ds, dir.file("both.bin"));
        CHECK(out.table_bytes_after < out.table_bytes_before);
        const Checkpoint back = read_compressed_checkpoint(dir.file("both.bin"));
        CHECK(back.model.bundles()[0].table().rows() == 4);
    }

    SUBCASE("invalid rank is rejected") {
        CompressOptions opt;
        opt.svd_rank = 40;
        CHECK_THROWS_AS(compress_checkpoint(ckpt, opt, ds, dir.file("bad.bin")),
                        ValueError);
    }
}

TEST_CASE("hashing before training shrinks the trained table") {
    SyntheticCtrDataset ds = generate_dataset(tiny_spec(), 99);
    const HashedTableSpec h = apply_hash(ds, 0, 15);
    CHECK(h.original_n == 30);
    TempDir dir;
    SweepConfig cfg = tiny_sweep(dir.str());
    cfg.modes = {BundleKind::SingleLayer};
    cfg.seeds = {1};
    cfg.hashes = {{0, 15}};
    const auto records = run_sweep(cfg, ds);
    // d * (15 + 30) embedding parameters across the two tables.
    CHECK(records[0].seeds[0].params_inference == 4 * 15 + 4 * 30);
}

TEST_CASE("results do not depend on the worker thread count") {
    const SyntheticCtrDataset ds = generate_dataset(tiny_spec(), 99);
    SweepConfig cfg = tiny_sweep("");  // no output dir
    cfg.write_checkpoints = false;

    ::setenv("MLET_THREADS", "1", 1);
    const auto serial = run_sweep(cfg, ds);
    ::setenv("MLET_THREADS", "4", 1);
    const auto threaded = run_sweep(cfg, ds);
    ::unsetenv("MLET_THREADS");

    REQUIRE(serial.size() == threaded.size());
    for (std::size_t r = 0; r < serial.size(); ++r) {
        CHECK(serial[r].config_id == threaded[r].config_id);
        for (std::size_t s = 0; s < serial[r].seeds.size(); ++s) {
            CHECK(serial[r].seeds[s].full.auc == threaded[r].seeds[s].full.auc);
            CHECK(serial[r].seeds[s].full.logloss ==
                  threaded[r].seeds[s].full.logloss);
            CHECK(serial[r].seeds[s].most_frequent.pr_auc ==
                  threaded[r].seeds[s].most_frequent.pr_auc);
        }
    }
}

TEST_CASE("thread budget respects MLET_THREADS") {
    ::setenv("MLET_THREADS", "3", 1);
    CHECK(thread_budget(10) == 3);
    CHECK(thread_budget(2) == 2);
    ::setenv("MLET_THREADS", "0", 1);
    CHECK(thread_budget(10) >= 1);
    ::unsetenv("MLET_THREADS");
    CHECK(thread_budget(1) == 1);
}
