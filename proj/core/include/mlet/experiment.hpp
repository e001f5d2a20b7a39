#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mlet/compress.hpp"
#include "mlet/ctr_model.hpp"
#include "mlet/metrics.hpp"
#include "mlet/synth_data.hpp"

namespace mlet {

/// One experiment grid: every (mode, d, k, init_std) combination is a
/// configuration, and each configuration runs once per seed.
struct SweepConfig {
    std::string dataset_path;  // loaded when non-empty, otherwise generated
    DatasetSpec dataset_spec;
    std::uint64_t dataset_seed = 42;

    std::vector<BundleKind> modes{BundleKind::SingleLayer};
    std::vector<std::size_t> d_list{8};
    std::vector<std::size_t> k_list{32};      // MLET configurations only
    std::vector<double> init_stds{0.25};      // MLET configurations only
    std::vector<std::uint64_t> seeds{1, 2, 3};

    double eta = 0.2;
    Optimizer optimizer = Optimizer::Sgd;
    double adagrad_epsilon = 1e-10;
    std::size_t batch_size = 128;
    std::size_t epochs = 1;

    /// Pre-training modulo hashing: (field, buckets) pairs.
    std::vector<std::pair<std::size_t, std::size_t>> hashes;

    std::string out_dir;
    bool write_checkpoints = true;
    double stratify_fraction = 0.10;
};

struct SeedResult {
    std::uint64_t seed = 0;
    EvalResult full;
    EvalResult most_frequent;
    EvalResult least_frequent;
    double train_logloss = 0.0;
    std::size_t train_samples = 0;
    double wall_seconds = 0.0;
    std::size_t params_train = 0;      // before collapse
    std::size_t params_inference = 0;  // after collapse
    std::string checkpoint_path;
};

/// One configuration with its per-seed results.
struct RunRecord {
    std::string config_id;
    BundleKind mode = BundleKind::SingleLayer;
    std::size_t d = 0;
    std::size_t k = 0;
    double init_std = 0.0;
    double eta = 0.0;
    Optimizer optimizer = Optimizer::Sgd;
    std::size_t batch_size = 0;
    std::size_t epochs = 1;
    std::string dataset_id;
    std::vector<SeedResult> seeds;
};

std::string make_config_id(BundleKind mode, std::size_t d, std::size_t k,
                           double init_std, Optimizer opt, double eta);

/// JSON form of a sweep config; every CLI flag has a field here, and
/// flags override file values.
std::string sweep_config_to_json(const SweepConfig& config);
SweepConfig sweep_config_from_json(const std::string& text);

/// Short identity string for compatibility checks between run records.
std::string dataset_id(const SyntheticCtrDataset& ds, const std::string& path);

/// Runs every (configuration, seed) cell against the dataset. Cells run
/// in parallel up to the MLET_THREADS env var (each cell itself is
/// single-threaded and deterministic); results land in a fixed order, so
/// output does not depend on scheduling. Writes runs/*.json and
/// checkpoints/*.bin under config.out_dir when out_dir is non-empty.
std::vector<RunRecord> run_sweep(const SweepConfig& config,
                                 const SyntheticCtrDataset& ds);

void write_run_record(const RunRecord& record, const std::string& dir);
RunRecord read_run_record(const std::string& path);

/// All runs/*.json records under the given directories (recursive).
std::vector<RunRecord> load_run_records(const std::vector<std::string>& dirs);

struct ReportRow {
    std::string config_id;
    BundleKind mode = BundleKind::SingleLayer;
    std::size_t d = 0;
    std::size_t k = 0;
    double init_std = 0.0;
    double eta = 0.0;
    Optimizer optimizer = Optimizer::Sgd;
    std::size_t batch_size = 0;
    std::size_t epochs = 1;
    std::size_t seed_count = 0;
    double auc_mean = 0.0, auc_sd = 0.0;
    double pr_auc_mean = 0.0, pr_auc_sd = 0.0;
    double logloss_mean = 0.0, logloss_sd = 0.0;
    double auc_most_mean = 0.0, auc_least_mean = 0.0;
    double pr_auc_most_mean = 0.0, pr_auc_least_mean = 0.0;
    double logloss_most_mean = 0.0, logloss_least_mean = 0.0;
    double train_logloss_mean = 0.0;
    double wall_seconds_mean = 0.0;
    std::size_t params_train = 0;
    std::size_t params_inference = 0;
};

/// Memory-reduction-at-iso-quality: the smallest MLET d whose mean AUC
/// reaches the single-layer baseline's mean AUC.
struct IsoQualityRow {
    std::string baseline_id;
    std::size_t baseline_d = 0;
    bool matched = false;
    std::string matched_id;
    std::size_t matched_d = 0;
    std::size_t matched_k = 0;
    double reduction = 0.0;  // baseline_d / matched_d
};

/// Rare-vs-frequent PR-AUC gains of an MLET configuration over the
/// single-layer baseline at the same d.
struct RareFrequentRow {
    std::string mlet_id;
    std::string baseline_id;
    double delta_pr_auc_least = 0.0;
    double delta_pr_auc_most = 0.0;
    bool rare_gain_ge_frequent = false;
};

struct Report {
    std::vector<ReportRow> rows;
    std::vector<IsoQualityRow> iso_quality;
    std::vector<RareFrequentRow> rare_frequent;
};

/// Seed-averaged summary. Throws ValueError when records mix datasets.
Report build_report(const std::vector<RunRecord>& records);

/// Stable, documented column set; one row per configuration.
void write_report_csv(const Report& report, const std::string& path);
void write_report_json(const Report& report, const std::string& path);

/// Post-training compression of a (collapsed) checkpoint.
struct CompressOptions {
    std::optional<std::size_t> svd_rank;
    bool int8 = false;
};

struct CompressOutcome {
    std::size_t table_bytes_before = 0;
    std::size_t table_bytes_after = 0;
    EvalResult eval;
    std::string out_path;
};

/// Applies the requested subset of {svd-rank, int8} to every embedding
/// table, re-evaluates on the dataset's test split and writes the
/// compressed checkpoint. MLET checkpoints are collapsed first.
CompressOutcome compress_checkpoint(const std::string& checkpoint_path,
                                    const CompressOptions& options,
                                    const SyntheticCtrDataset& ds,
                                    const std::string& out_path);

/// Loads a compressed checkpoint back into a dense model (factors are
/// multiplied out, codes dequantized).
Checkpoint read_compressed_checkpoint(const std::string& path);

/// Parallelism cap: MLET_THREADS env var, else hardware concurrency.
std::size_t thread_budget(std::size_t cells);

}  // namespace mlet
