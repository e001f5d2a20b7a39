#include "mlet/ctr_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "mlet/errors.hpp"
#include "mlet/rng.hpp"
#include "mlet/serialize.hpp"

namespace mlet {

namespace {

constexpr std::uint64_t kDenseInitStream = 0xD001;
constexpr std::uint64_t kTopInitStream = 0xD002;
constexpr std::uint64_t kShuffleStream = 0x5F00;

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double clamped_nll(double p, std::uint8_t y) {
    constexpr double kClamp = 1e-15;
    const double q = std::clamp(p, kClamp, 1.0 - kClamp);
    return y ? -std::log(q) : -std::log(1.0 - q);
}

void check_model_config(const ModelConfig& cfg) {
    if (cfg.categories.empty()) {
        throw ValueError("model needs at least one sparse field");
    }
    if (cfg.d == 0) {
        throw ValueError("embedding dimension must be >= 1");
    }
    for (std::size_t n : cfg.categories) {
        if (n == 0) {
            throw ValueError("field cardinality must be >= 1");
        }
    }
    if (cfg.mode == BundleKind::Mlet && cfg.k == 0) {
        throw ValueError("MLET mode requires inner dimension k >= 1");
    }
}

// Writes bundle column `idx` (single) or W1 * W2[:, idx] (MLET) into out.
void embed_into(const EmbeddingBundle& b, std::size_t idx, std::span<double> out) {
    const std::size_t d = b.d();
    if (b.kind() == BundleKind::SingleLayer) {
        const Matrix& w = b.table();
        for (std::size_t r = 0; r < d; ++r) {
            out[r] = w(r, idx);
        }
        return;
    }
    const Matrix& w1 = b.w1();
    const Matrix& w2 = b.w2();
    const std::size_t k = b.k();
    for (std::size_t r = 0; r < d; ++r) {
        double s = 0.0;
        for (std::size_t t = 0; t < k; ++t) {
            s += w1(r, t) * w2(t, idx);
        }
        out[r] = s;
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

}  // namespace

CtrModel CtrModel::init(const ModelConfig& config, const InitSpec& init) {
    check_model_config(config);
    CtrModel m;
    m.cfg_ = config;
    m.bundles_.reserve(config.field_count());
    for (std::size_t f = 0; f < config.field_count(); ++f) {
        InitSpec field_init = init;
        field_init.seed = derive_seed(init.seed, f);
        if (config.mode == BundleKind::SingleLayer) {
            m.bundles_.push_back(init_single(config.d, config.categories[f], field_init));
        } else {
            m.bundles_.push_back(
                init_mlet(config.d, config.categories[f], config.k, field_init));
        }
    }
    if (config.dense_dim > 0) {
        m.dense_w_ = Matrix(config.d, config.dense_dim);
        Rng rng(derive_seed(init.seed, kDenseInitStream));
        const double a =
            std::sqrt(6.0 / static_cast<double>(config.d + config.dense_dim));
        for (double& x : m.dense_w_.data()) {
            x = rng.uniform(-a, a);
        }
    }
    const std::size_t terms = config.interaction_terms();
    m.top_w_.assign(terms + 1, 0.0);
    Rng rng(derive_seed(init.seed, kTopInitStream));
    const double a = std::sqrt(6.0 / static_cast<double>(terms + 2));
    for (std::size_t t = 0; t < terms; ++t) {
        m.top_w_[t] = rng.uniform(-a, a);
    }
    // Bias starts at zero.
    return m;
}

CtrModel CtrModel::from_parts(ModelConfig config, std::vector<EmbeddingBundle> bundles,
                              Matrix dense_weights, std::vector<double> top_weights) {
    check_model_config(config);
    if (bundles.size() != config.field_count()) {
        throw ValueError("bundle count does not match field count");
    }
    if (top_weights.size() != config.interaction_terms() + 1) {
        throw ValueError("top weight vector has wrong length");
    }
    CtrModel m;
    m.cfg_ = std::move(config);
    m.bundles_ = std::move(bundles);
    m.dense_w_ = std::move(dense_weights);
    m.top_w_ = std::move(top_weights);
    return m;
}

void CtrModel::forward_backward(const std::vector<Sample>& pool,
                                std::span<const std::size_t> ids,
                                std::vector<double>* probs_out, Gradients* grads_out,
                                double* loss_sum_out) const {
    const std::size_t F = cfg_.field_count();
    const std::size_t d = cfg_.d;
    const bool dense = has_dense();
    const std::size_t n_vectors = F + (dense ? 1 : 0);
    const std::size_t terms = cfg_.interaction_terms();
    const double batch_size = static_cast<double>(ids.size());
    if (ids.empty()) {
        throw ValueError("empty batch");
    }

    if (probs_out != nullptr) {
        probs_out->clear();
        probs_out->reserve(ids.size());
    }
    if (grads_out != nullptr) {
        grads_out->embedding.clear();
        for (std::size_t f = 0; f < F; ++f) {
            grads_out->embedding.emplace_back(d, cfg_.categories[f]);
        }
        grads_out->dense_weights = dense ? Matrix(d, cfg_.dense_dim) : Matrix();
        grads_out->top_weights.assign(terms + 1, 0.0);
    }
    if (loss_sum_out != nullptr) {
        *loss_sum_out = 0.0;
    }

    // Scratch reused across samples.
    std::vector<std::vector<double>> vecs(n_vectors, std::vector<double>(d));
    std::vector<double> dots(terms);
    std::vector<std::vector<double>> dvecs(n_vectors, std::vector<double>(d));

    for (std::size_t id : ids) {
        const Sample& smp = pool[id];
        if (smp.indices.size() != F) {
            throw ValueError("sample has wrong field count");
        }
        for (std::size_t f = 0; f < F; ++f) {
            if (smp.indices[f] >= cfg_.categories[f]) {
                throw ValueError("sample index out of range for field " +
                                 std::to_string(f));
            }
            embed_into(bundles_[f], smp.indices[f], vecs[f]);
        }
        if (dense) {
            if (smp.dense.size() != cfg_.dense_dim) {
                throw ValueError("sample dense width does not match model");
            }
            auto& z = vecs[F];
            for (std::size_t r = 0; r < d; ++r) {
                double s = 0.0;
                for (std::size_t j = 0; j < cfg_.dense_dim; ++j) {
                    s += dense_w_(r, j) * static_cast<double>(smp.dense[j]);
                }
                z[r] = s;
            }
        }

        // Interaction terms in lexicographic (p, q) order. With a dense
        // vector: p < q over all F+1 vectors; without: p <= q over the F
        // embeddings (self dots included). Both orders have F(F+1)/2 terms.
        double logit = top_w_[terms];  // bias
        std::size_t t = 0;
        for (std::size_t p = 0; p < n_vectors; ++p) {
            for (std::size_t q = dense ? p + 1 : p; q < n_vectors; ++q) {
                dots[t] = dot(vecs[p], vecs[q]);
                logit += top_w_[t] * dots[t];
                ++t;
            }
        }
        const double prob = sigmoid(logit);
        if (probs_out != nullptr) {
            probs_out->push_back(prob);
        }
        if (loss_sum_out != nullptr) {
            *loss_sum_out += clamped_nll(prob, smp.label);
        }

        if (grads_out == nullptr) {
            continue;
        }
        const double delta = (prob - static_cast<double>(smp.label)) / batch_size;
        grads_out->top_weights[terms] += delta;
        for (auto& dv : dvecs) {
            std::fill(dv.begin(), dv.end(), 0.0);
        }
        t = 0;
        for (std::size_t p = 0; p < n_vectors; ++p) {
            for (std::size_t q = dense ? p + 1 : p; q < n_vectors; ++q) {
                const double w = top_w_[t];
                grads_out->top_weights[t] += delta * dots[t];
                if (p == q) {
                    for (std::size_t r = 0; r < d; ++r) {
                        dvecs[p][r] += 2.0 * delta * w * vecs[p][r];
                    }
                } else {
                    for (std::size_t r = 0; r < d; ++r) {
                        dvecs[p][r] += delta * w * vecs[q][r];
                        dvecs[q][r] += delta * w * vecs[p][r];
                    }
                }
                ++t;
            }
        }
        for (std::size_t f = 0; f < F; ++f) {
            grads_out->embedding[f].add(smp.indices[f], dvecs[f]);
        }
        if (dense) {
            for (std::size_t r = 0; r < d; ++r) {
                for (std::size_t j = 0; j < cfg_.dense_dim; ++j) {
                    grads_out->dense_weights(r, j) +=
                        dvecs[F][r] * static_cast<double>(smp.dense[j]);
                }
            }
        }
    }
}

std::vector<double> CtrModel::forward(const std::vector<Sample>& pool,
                                      std::span<const std::size_t> ids) const {
    std::vector<double> probs;
    forward_backward(pool, ids, &probs, nullptr, nullptr);
    return probs;
}

Gradients CtrModel::backward(const std::vector<Sample>& pool,
                             std::span<const std::size_t> ids) const {
    Gradients grads;
    forward_backward(pool, ids, nullptr, &grads, nullptr);
    return grads;
}

void CtrModel::collapse_bundles() {
    for (auto& b : bundles_) {
        if (b.kind() == BundleKind::Mlet) {
            b = collapse(b).bundle;
        }
    }
    cfg_.mode = BundleKind::SingleLayer;
    cfg_.k = 0;
}

std::size_t CtrModel::parameter_count() const {
    std::size_t count = top_w_.size() + dense_w_.size();
    for (const auto& b : bundles_) {
        count += b.parameter_count();
    }
    return count;
}

std::size_t CtrModel::inference_parameter_count() const {
    std::size_t count = top_w_.size() + dense_w_.size();
    for (const auto& b : bundles_) {
        count += b.d() * b.n();
    }
    return count;
}

bool CtrModel::all_finite() const {
    for (const auto& b : bundles_) {
        if (b.kind() == BundleKind::SingleLayer) {
            if (!b.table().all_finite()) {
                return false;
            }
        } else if (!b.w1().all_finite() || !b.w2().all_finite()) {
            return false;
        }
    }
    if (!dense_w_.all_finite()) {
        return false;
    }
    return std::all_of(top_w_.begin(), top_w_.end(),
                       [](double x) { return std::isfinite(x); });
}

double CtrModel::max_abs_parameter() const {
    double m = 0.0;
    for (const auto& b : bundles_) {
        if (b.kind() == BundleKind::SingleLayer) {
            m = std::max(m, max_abs(b.table()));
        } else {
            m = std::max(m, std::max(max_abs(b.w1()), max_abs(b.w2())));
        }
    }
    m = std::max(m, max_abs(dense_w_));
    for (double x : top_w_) {
        m = std::max(m, std::abs(x));
    }
    return m;
}

namespace {

// Applies one optimizer step to `param` given gradient g and its Adagrad
// accumulator cell.
inline void apply_update(double& param, double g, double& acc,
                         const TrainConfig& cfg) {
    if (cfg.optimizer == Optimizer::Adagrad) {
        acc += g * g;
        param -= cfg.eta * g / std::sqrt(acc + cfg.adagrad_epsilon);
    } else {
        param -= cfg.eta * g;
    }
}

void init_optimizer_state(const CtrModel& model, OptimizerState& state) {
    const auto& cfg = model.config();
    state.table_acc.clear();
    state.w1_acc.clear();
    state.w2_acc.clear();
    for (const auto& b : model.bundles()) {
        if (b.kind() == BundleKind::SingleLayer) {
            state.table_acc.emplace_back(b.d(), b.n());
            state.w1_acc.emplace_back();
            state.w2_acc.emplace_back();
        } else {
            state.table_acc.emplace_back();
            state.w1_acc.emplace_back(b.d(), b.k());
            state.w2_acc.emplace_back(b.k(), b.n());
        }
    }
    state.dense_acc = model.has_dense() ? Matrix(cfg.d, cfg.dense_dim) : Matrix();
    state.top_acc.assign(model.top_weights().size(), 0.0);
    state.initialized = true;
}

void apply_batch_updates(CtrModel& model, const Gradients& grads,
                         const TrainConfig& cfg, OptimizerState& state) {
    const std::size_t F = model.config().field_count();
    for (std::size_t f = 0; f < F; ++f) {
        EmbeddingBundle& b = model.bundles_mut()[f];
        const SparseGradient& g = grads.embedding[f];
        if (b.kind() == BundleKind::SingleLayer) {
            // Single-layer step: touches only the queried columns.
            Matrix& w = b.table_mut();
            Matrix& acc = state.table_acc[f];
            for (const auto& [idx, col] : g.columns()) {
                for (std::size_t r = 0; r < b.d(); ++r) {
                    apply_update(w(r, idx), col[r], acc(r, idx), cfg);
                }
            }
            continue;
        }
        // MLET step with the exact layer gradients G W2^T and W1^T G,
        // both evaluated at the pre-update factors.
        Matrix& w1 = b.w1_mut();
        Matrix& w2 = b.w2_mut();
        const std::size_t d = b.d();
        const std::size_t k = b.k();
        Matrix g1(d, k);  // G * W2^T, dense
        std::map<std::size_t, std::vector<double>> g2_cols;
        for (const auto& [idx, col] : g.columns()) {
            for (std::size_t r = 0; r < d; ++r) {
                for (std::size_t t = 0; t < k; ++t) {
                    g1(r, t) += col[r] * w2(t, idx);
                }
            }
            std::vector<double> g2(k, 0.0);
            for (std::size_t t = 0; t < k; ++t) {
                for (std::size_t r = 0; r < d; ++r) {
                    g2[t] += w1(r, t) * col[r];
                }
            }
            g2_cols.emplace(idx, std::move(g2));
        }
        Matrix& acc1 = state.w1_acc[f];
        for (std::size_t r = 0; r < d; ++r) {
            for (std::size_t t = 0; t < k; ++t) {
                apply_update(w1(r, t), g1(r, t), acc1(r, t), cfg);
            }
        }
        Matrix& acc2 = state.w2_acc[f];
        for (const auto& [idx, g2] : g2_cols) {
            for (std::size_t t = 0; t < k; ++t) {
                apply_update(w2(t, idx), g2[t], acc2(t, idx), cfg);
            }
        }
    }
    if (model.has_dense()) {
        Matrix& w = model.dense_weights_mut();
        auto wd = w.data();
        const auto gd = grads.dense_weights.data();
        auto ad = state.dense_acc.data();
        for (std::size_t i = 0; i < wd.size(); ++i) {
            apply_update(wd[i], gd[i], ad[i], cfg);
        }
    }
    auto& top = model.top_weights_mut();
    for (std::size_t i = 0; i < top.size(); ++i) {
        apply_update(top[i], grads.top_weights[i], state.top_acc[i], cfg);
    }
}

}  // namespace

LossReport train_epoch(CtrModel& model, const SyntheticCtrDataset& ds,
                       const TrainConfig& config, OptimizerState& state,
                       std::size_t epoch) {
    if (config.eta < 0.0) {
        throw ValueError("learning rate must be >= 0");
    }
    if (config.batch_size == 0) {
        throw ValueError("batch size must be >= 1");
    }
    if (ds.train_end() == 0) {
        throw ValueError("dataset has an empty training split");
    }
    if (!state.initialized) {
        init_optimizer_state(model, state);
    }

    std::vector<std::size_t> order(ds.train_end());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(config.seed, kShuffleStream + epoch));
    fisher_yates_shuffle(order, shuffle_rng);

    Gradients grads;
    double loss_sum = 0.0;
    std::size_t iteration = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::size_t len = std::min(config.batch_size, order.size() - start);
        const std::span<const std::size_t> batch(order.data() + start, len);
        double batch_loss = 0.0;
        model.forward_backward(ds.samples(), batch, nullptr, &grads, &batch_loss);
        if (!std::isfinite(batch_loss)) {
            throw TrainingDiverged(
                "training diverged: non-finite loss at iteration " +
                    std::to_string(iteration) + " (batch starting at " +
                    std::to_string(start) + "), max |param| = " +
                    std::to_string(model.max_abs_parameter()),
                iteration, start / config.batch_size, model.max_abs_parameter());
        }
        loss_sum += batch_loss;
        apply_batch_updates(model, grads, config, state);
        ++iteration;
    }
    return LossReport{loss_sum / static_cast<double>(order.size()), order.size()};
}

LossReport train(CtrModel& model, const SyntheticCtrDataset& ds,
                 const TrainConfig& config) {
    if (config.epochs == 0) {
        throw ValueError("epochs must be >= 1");
    }
    OptimizerState state;
    LossReport report;
    for (std::size_t e = 0; e < config.epochs; ++e) {
        report = train_epoch(model, ds, config, state, e);
    }
    return report;
}

EvalResult evaluate(const CtrModel& model, const SyntheticCtrDataset& ds,
                    std::span<const std::size_t> ids) {
    const std::vector<double> probs = model.forward(ds.samples(), ids);
    std::vector<std::uint8_t> labels(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        labels[i] = ds.samples()[ids[i]].label;
    }
    return evaluate_scores(probs, labels);
}

std::vector<std::size_t> test_ids(const SyntheticCtrDataset& ds) {
    std::vector<std::size_t> ids(ds.test_end() - ds.val_end());
    std::iota(ids.begin(), ids.end(), ds.val_end());
    return ids;
}

void write_checkpoint(const std::string& path, const CtrModel& model,
                      const std::string& config_json) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw IoError("cannot open " + path + " for writing");
    }
    write_magic(os, "MLETCKP1");
    write_u32_le(os, static_cast<std::uint32_t>(config_json.size()));
    os.write(config_json.data(), static_cast<std::streamsize>(config_json.size()));
    write_u32_le(os, static_cast<std::uint32_t>(model.bundles().size()));
    for (const auto& b : model.bundles()) {
        write_bundle(os, b);
    }
    write_u8(os, model.has_dense() ? 1 : 0);
    if (model.has_dense()) {
        write_matrix(os, model.dense_weights());
    }
    write_u64_le(os, model.top_weights().size());
    for (double x : model.top_weights()) {
        write_f64_le(os, x);
    }
    if (!os) {
        throw IoError("write failed: " + path);
    }
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("cannot open " + path);
    }
    expect_magic(is, "MLETCKP1");
    const std::uint32_t json_len = read_u32_le(is);
    std::string config_json(json_len, '\0');
    is.read(config_json.data(), json_len);
    if (static_cast<std::uint32_t>(is.gcount()) != json_len) {
        throw IoError("truncated checkpoint config");
    }
    const std::uint32_t n_bundles = read_u32_le(is);
    std::vector<EmbeddingBundle> bundles;
    bundles.reserve(n_bundles);
    for (std::uint32_t i = 0; i < n_bundles; ++i) {
        bundles.push_back(read_bundle(is));
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
    cfg.mode = BundleKind::SingleLayer;
    cfg.k = 0;
    for (const auto& b : bundles) {
        if (b.kind() == BundleKind::Mlet) {
            cfg.mode = BundleKind::Mlet;
            cfg.k = b.k();
        }
    }
    cfg.dense_dim = dense ? dense_w.cols() : 0;
    return Checkpoint{CtrModel::from_parts(std::move(cfg), std::move(bundles),
                                           std::move(dense_w), std::move(top)),
                      std::move(config_json)};
}

}  // namespace mlet
