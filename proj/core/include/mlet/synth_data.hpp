#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mlet/matrix.hpp"

namespace mlet {

struct FieldSpec {
    std::size_t categories = 1000;
    double zipf_alpha = 1.2;  // 0 = uniform
};

/// Generator parameters. The click model mirrors the CTR model's
/// interaction form (pairwise dots of per-category latent vectors plus a
/// linear dense term) with Gaussian logit noise, so the task is learnable
/// but AUC saturates below 1.
struct DatasetSpec {
    std::vector<FieldSpec> fields{{1000, 1.2}, {1000, 1.2}};
    std::size_t dense_dim = 4;
    std::size_t train_count = 200000;
    std::size_t val_count = 20000;
    std::size_t test_count = 20000;
    /// Std of the Gaussian noise added to the ground-truth logit.
    double noise_std = 0.5;
    /// Multiplier on the pairwise-interaction part of the logit.
    double interaction_scale = 0.6;
    /// Dimension of the hidden ground-truth latent vectors.
    std::size_t latent_dim = 8;
    /// When > 0, category latents cluster around `latent_groups` shared
    /// centers (category c uses center c mod latent_groups), which gives
    /// rare categories structure shared with frequent ones. 0 = fully
    /// independent latents.
    std::size_t latent_groups = 64;
    /// Per-entry std of the deviation from the group center.
    double group_noise = 0.25;
    /// When > 0, adds freq_label_bias * log(p(c)/p(0)) per field to the
    /// logit, making rarely queried categories less likely to be clicked
    /// (real CTR data shows the same popularity/click correlation).
    double freq_label_bias = 0.3;

    std::size_t total() const { return train_count + val_count + test_count; }
};

struct Sample {
    std::vector<std::uint32_t> indices;  // one per sparse field
    std::vector<float> dense;
    std::uint8_t label = 0;
};

/// Ground-truth internals kept out of the dataset itself; written to a
/// debug sidecar on request.
struct GeneratorDebug {
    std::vector<Matrix> latents;  // per field, latent_dim x categories
    std::vector<double> dense_weights;
};

class SyntheticCtrDataset {
public:
    SyntheticCtrDataset(DatasetSpec spec, std::uint64_t seed,
                        std::vector<Sample> samples);

    const DatasetSpec& spec() const { return spec_; }
    std::uint64_t seed() const { return seed_; }
    const std::vector<Sample>& samples() const { return samples_; }
    std::size_t field_count() const { return spec_.fields.size(); }

    // Contiguous split ranges over the sample array: [0, train_end) is
    // train, [train_end, val_end) validation, [val_end, test_end) test.
    std::size_t train_end() const { return spec_.train_count; }
    std::size_t val_end() const { return spec_.train_count + spec_.val_count; }
    std::size_t test_end() const { return spec_.total(); }

    /// Per field, per category occurrence counts over the training split.
    const std::vector<std::vector<std::uint64_t>>& train_frequencies() const {
        return train_freq_;
    }

    // Mutation points for the pre-training hashing transform.
    std::vector<Sample>& samples_mut() { return samples_; }
    void set_field_cardinality(std::size_t field, std::size_t categories);
    void recompute_train_frequencies();

    /// Full-scan invariant check (index ranges, label values).
    void validate() const;

private:
    DatasetSpec spec_;
    std::uint64_t seed_ = 0;
    std::vector<Sample> samples_;
    std::vector<std::vector<std::uint64_t>> train_freq_;
};

/// Deterministic generation: same spec and seed give a byte-identical
/// dataset file. Pass `debug` to capture the ground-truth latents.
SyntheticCtrDataset generate_dataset(const DatasetSpec& spec, std::uint64_t seed,
                                     GeneratorDebug* debug = nullptr);

/// Per-test-sample frequency score: product over fields of the Laplace
/// smoothed (add-1) training-split count of the queried category.
/// Returned in test-split order.
std::vector<double> frequency_scores(const SyntheticCtrDataset& ds);

struct Strata {
    std::vector<std::size_t> most_frequent;   // global sample indices
    std::vector<std::size_t> least_frequent;  // global sample indices
};

/// Sorts test samples by frequency score (ties broken by sample index)
/// and returns the top and bottom floor(fraction * |test|) of them.
Strata stratify(const SyntheticCtrDataset& ds, double fraction = 0.10);

/// Dataset file: one JSON header line (spec, counts, seed), then fixed
/// width binary records of little-endian u32 indices, f32 dense values
/// and a u8 label.
void write_dataset(const SyntheticCtrDataset& ds, const std::string& path);
SyntheticCtrDataset read_dataset(const std::string& path);

void write_debug_sidecar(const GeneratorDebug& debug, const std::string& path);

/// Criteo-like CSV import: label column, `dense_dim` numeric columns,
/// then `sparse_fields` categorical columns whose strings are hashed
/// (FNV-1a, stable across platforms) into per-field bucket counts.
struct CsvImportSpec {
    std::string path;
    std::size_t dense_dim = 0;
    std::size_t sparse_fields = 1;
    std::vector<std::size_t> buckets{100000};  // broadcast if a single value
    double train_fraction = 0.8;
    double val_fraction = 0.1;
    char delimiter = 0;  // 0 = auto-detect tab vs comma
};

SyntheticCtrDataset import_csv(const CsvImportSpec& spec);

/// The 64-bit FNV-1a hash used for categorical strings.
std::uint64_t fnv1a64(const std::string& s);

}  // namespace mlet
