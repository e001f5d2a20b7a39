#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mlet/embedding.hpp"
#include "mlet/gradflow.hpp"
#include "mlet/matrix.hpp"
#include "mlet/metrics.hpp"
#include "mlet/synth_data.hpp"

namespace mlet {

enum class Optimizer { Sgd, Adagrad };

struct TrainConfig {
    double eta = 0.2;
    Optimizer optimizer = Optimizer::Sgd;
    double adagrad_epsilon = 1e-10;
    std::size_t batch_size = 128;
    std::size_t epochs = 1;
    std::uint64_t seed = 1;
    InitSpec init;
};

struct ModelConfig {
    std::vector<std::size_t> categories;  // per sparse field
    std::size_t d = 8;
    BundleKind mode = BundleKind::SingleLayer;
    std::size_t k = 0;  // inner dimension, MLET mode only
    std::size_t dense_dim = 0;

    std::size_t field_count() const { return categories.size(); }
    /// Pairwise interaction terms (bias excluded). With a dense path the
    /// F embeddings and the projected dense vector interact pairwise;
    /// without one, the F embeddings interact pairwise including self
    /// dots. Both give F(F+1)/2 terms.
    std::size_t interaction_terms() const {
        return categories.size() * (categories.size() + 1) / 2;
    }
};

struct LossReport {
    double logloss = 0.0;
    std::size_t sample_count = 0;
};

/// Per-batch gradients of the mean LogLoss. Embedding gradients arrive
/// column-sparse, one SparseGradient per field.
struct Gradients {
    std::vector<SparseGradient> embedding;
    Matrix dense_weights;             // empty when the model has no dense path
    std::vector<double> top_weights;  // interaction weights, bias last
};

/// Minimal CTR model: per-field embeddings plus a projected dense vector,
/// all pairwise dot products, a linear head and a logistic output.
class CtrModel {
public:
    static CtrModel init(const ModelConfig& config, const InitSpec& init);

    /// Assembles a model from existing pieces (checkpoint loading, tests).
    static CtrModel from_parts(ModelConfig config, std::vector<EmbeddingBundle> bundles,
                               Matrix dense_weights, std::vector<double> top_weights);

    const ModelConfig& config() const { return cfg_; }
    bool has_dense() const { return cfg_.dense_dim > 0; }

    const std::vector<EmbeddingBundle>& bundles() const { return bundles_; }
    std::vector<EmbeddingBundle>& bundles_mut() { return bundles_; }
    const Matrix& dense_weights() const { return dense_w_; }
    Matrix& dense_weights_mut() { return dense_w_; }
    const std::vector<double>& top_weights() const { return top_w_; }
    std::vector<double>& top_weights_mut() { return top_w_; }

    /// Per-sample click probabilities for pool rows selected by ids.
    std::vector<double> forward(const std::vector<Sample>& pool,
                                std::span<const std::size_t> ids) const;

    /// Exact gradients of the mean LogLoss over the batch (labels are
    /// taken from the samples).
    Gradients backward(const std::vector<Sample>& pool,
                       std::span<const std::size_t> ids) const;

    /// Replaces every MLET bundle with its single-layer product.
    void collapse_bundles();

    std::size_t parameter_count() const;
    /// Storage after collapse: sum of d * n_f plus dense and top weights.
    std::size_t inference_parameter_count() const;

    bool all_finite() const;
    double max_abs_parameter() const;

private:
    friend LossReport train_epoch(CtrModel&, const SyntheticCtrDataset&,
                                  const TrainConfig&, struct OptimizerState&,
                                  std::size_t);

    void forward_backward(const std::vector<Sample>& pool,
                          std::span<const std::size_t> ids,
                          std::vector<double>* probs_out, Gradients* grads_out,
                          double* loss_sum_out) const;

    ModelConfig cfg_;
    std::vector<EmbeddingBundle> bundles_;
    Matrix dense_w_;  // d x dense_dim
    std::vector<double> top_w_;
};

/// Adagrad accumulators; unused (but harmless) under plain SGD. One
/// instance must persist across the epochs of a single training run.
struct OptimizerState {
    std::vector<Matrix> table_acc;  // single-layer mode, per field
    std::vector<Matrix> w1_acc;     // MLET mode, per field
    std::vector<Matrix> w2_acc;
    Matrix dense_acc;
    std::vector<double> top_acc;
    bool initialized = false;
};

/// One pass over the training split in a seed-determined shuffle
/// (Fisher-Yates, reshuffled per epoch). Single-layer bundles take the
/// sparse single-layer step; MLET bundles update W1 and W2 with their
/// exact layer gradients. Throws TrainingDiverged on a non-finite loss.
LossReport train_epoch(CtrModel& model, const SyntheticCtrDataset& ds,
                       const TrainConfig& config, OptimizerState& state,
                       std::size_t epoch = 0);

/// Runs config.epochs epochs with fresh optimizer state; returns the last
/// epoch's report.
LossReport train(CtrModel& model, const SyntheticCtrDataset& ds,
                 const TrainConfig& config);

/// Forward over the given sample ids, then AUC / PR-AUC / LogLoss.
EvalResult evaluate(const CtrModel& model, const SyntheticCtrDataset& ds,
                    std::span<const std::size_t> ids);

/// All test-split sample ids of a dataset.
std::vector<std::size_t> test_ids(const SyntheticCtrDataset& ds);

/// Checkpoint: magic, a caller-provided JSON snapshot, then bundles and
/// head weights. The snapshot travels as an opaque string.
void write_checkpoint(const std::string& path, const CtrModel& model,
                      const std::string& config_json);
struct Checkpoint {
    CtrModel model;
    std::string config_json;
};
Checkpoint read_checkpoint(const std::string& path);

}  // namespace mlet
