#include "mlet/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "mlet/errors.hpp"
#include "mlet/rng.hpp"
#include "mlet/serialize.hpp"

namespace mlet {

namespace {

using nlohmann::json;

// Stream tags for the independent deterministic rngs of one dataset seed.
constexpr std::uint64_t kLatentStream = 1;
constexpr std::uint64_t kSampleStream = 2;

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void check_spec(const DatasetSpec& spec) {
    if (spec.fields.empty()) {
        throw ValueError("dataset spec has no sparse fields");
    }
    for (const auto& f : spec.fields) {
        if (f.categories < 2) {
            throw ValueError("field cardinality must be >= 2, got " +
                             std::to_string(f.categories));
        }
        if (f.zipf_alpha < 0.0) {
            throw ValueError("zipf alpha must be >= 0");
        }
    }
    if (spec.train_count == 0) {
        throw ValueError("train split must be non-empty");
    }
    if (spec.noise_std < 0.0 || spec.group_noise < 0.0) {
        throw ValueError("noise stds must be >= 0");
    }
    if (spec.latent_dim == 0) {
        throw ValueError("latent_dim must be >= 1");
    }
}

// Inverse-CDF sampler over precomputed cumulative Zipf weights:
// weight(c) = (c+1)^-alpha, exact and O(log n) per draw.
class ZipfSampler {
public:
    ZipfSampler(std::size_t n, double alpha) : cumulative_(n) {
        double acc = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            acc += std::pow(static_cast<double>(c + 1), -alpha);
            cumulative_[c] = acc;
        }
    }

    std::size_t draw(Rng& rng) const {
        const double u = rng.uniform() * cumulative_.back();
        const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
        const std::size_t idx = static_cast<std::size_t>(it - cumulative_.begin());
        return idx < cumulative_.size() ? idx : cumulative_.size() - 1;
    }

    double total_weight() const { return cumulative_.back(); }

private:
    std::vector<double> cumulative_;
};

json spec_to_json(const DatasetSpec& spec, std::uint64_t seed) {
    json fields = json::array();
    for (const auto& f : spec.fields) {
        fields.push_back({{"categories", f.categories}, {"alpha", f.zipf_alpha}});
    }
    return json{{"magic", "MLETDS1"},
                {"fields", fields},
                {"dense_dim", spec.dense_dim},
                {"train", spec.train_count},
                {"val", spec.val_count},
                {"test", spec.test_count},
                {"noise_std", spec.noise_std},
                {"interaction_scale", spec.interaction_scale},
                {"latent_dim", spec.latent_dim},
                {"latent_groups", spec.latent_groups},
                {"group_noise", spec.group_noise},
                {"freq_label_bias", spec.freq_label_bias},
                {"seed", seed}};
}

DatasetSpec spec_from_json(const json& j) {
    DatasetSpec spec;
    spec.fields.clear();
    for (const auto& f : j.at("fields")) {
        spec.fields.push_back({f.at("categories").get<std::size_t>(),
                               f.at("alpha").get<double>()});
    }
    spec.dense_dim = j.at("dense_dim").get<std::size_t>();
    spec.train_count = j.at("train").get<std::size_t>();
    spec.val_count = j.at("val").get<std::size_t>();
    spec.test_count = j.at("test").get<std::size_t>();
    spec.noise_std = j.at("noise_std").get<double>();
    spec.interaction_scale = j.at("interaction_scale").get<double>();
    spec.latent_dim = j.at("latent_dim").get<std::size_t>();
    spec.latent_groups = j.at("latent_groups").get<std::size_t>();
    spec.group_noise = j.at("group_noise").get<double>();
    spec.freq_label_bias = j.at("freq_label_bias").get<double>();
    return spec;
}

}  // namespace

SyntheticCtrDataset::SyntheticCtrDataset(DatasetSpec spec, std::uint64_t seed,
                                         std::vector<Sample> samples)
    : spec_(std::move(spec)), seed_(seed), samples_(std::move(samples)) {
    if (samples_.size() != spec_.total()) {
        throw ValueError("sample count " + std::to_string(samples_.size()) +
                         " does not match split sizes totaling " +
                         std::to_string(spec_.total()));
    }
    validate();
    recompute_train_frequencies();
}

void SyntheticCtrDataset::set_field_cardinality(std::size_t field,
                                                std::size_t categories) {
    if (field >= spec_.fields.size()) {
        throw ValueError("no such field: " + std::to_string(field));
    }
    spec_.fields[field].categories = categories;
}

void SyntheticCtrDataset::recompute_train_frequencies() {
    train_freq_.assign(spec_.fields.size(), {});
    for (std::size_t f = 0; f < spec_.fields.size(); ++f) {
        train_freq_[f].assign(spec_.fields[f].categories, 0);
    }
    for (std::size_t s = 0; s < train_end(); ++s) {
        for (std::size_t f = 0; f < spec_.fields.size(); ++f) {
            ++train_freq_[f][samples_[s].indices[f]];
        }
    }
}

void SyntheticCtrDataset::validate() const {
    for (std::size_t s = 0; s < samples_.size(); ++s) {
        const Sample& smp = samples_[s];
        if (smp.indices.size() != spec_.fields.size()) {
            throw ValueError("sample " + std::to_string(s) + " has " +
                             std::to_string(smp.indices.size()) + " indices, expected " +
                             std::to_string(spec_.fields.size()));
        }
        for (std::size_t f = 0; f < smp.indices.size(); ++f) {
            if (smp.indices[f] >= spec_.fields[f].categories) {
                throw ValueError("sample " + std::to_string(s) + " field " +
                                 std::to_string(f) + " index out of range");
            }
        }
        if (smp.dense.size() != spec_.dense_dim) {
            throw ValueError("sample " + std::to_string(s) + " has wrong dense width");
        }
        if (smp.label > 1) {
            throw ValueError("sample " + std::to_string(s) + " label is not 0/1");
        }
    }
}

SyntheticCtrDataset generate_dataset(const DatasetSpec& spec, std::uint64_t seed,
                                     GeneratorDebug* debug) {
    check_spec(spec);
    const std::size_t n_fields = spec.fields.size();
    const std::size_t h = spec.latent_dim;

    // Ground-truth latents. With grouping enabled, category c of a field
    // sits near center (c mod groups), so rank-rare categories share
    // structure with rank-frequent ones.
    Rng lat_rng(derive_seed(seed, kLatentStream));
    std::vector<Matrix> latents;
    latents.reserve(n_fields);
    for (std::size_t f = 0; f < n_fields; ++f) {
        const std::size_t n = spec.fields[f].categories;
        Matrix lat(h, n);
        if (spec.latent_groups > 0) {
            Matrix centers(h, spec.latent_groups);
            for (double& x : centers.data()) {
                x = lat_rng.gaussian(0.0, 1.0);
            }
            for (std::size_t c = 0; c < n; ++c) {
                const std::size_t g = c % spec.latent_groups;
                for (std::size_t r = 0; r < h; ++r) {
                    lat(r, c) = centers(r, g) + lat_rng.gaussian(0.0, spec.group_noise);
                }
            }
        } else {
            for (double& x : lat.data()) {
                x = lat_rng.gaussian(0.0, 1.0);
            }
        }
        latents.push_back(std::move(lat));
    }
    std::vector<double> dense_w(spec.dense_dim);
    const double dense_scale =
        1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(1, spec.dense_dim)));
    for (double& w : dense_w) {
        w = lat_rng.gaussian(0.0, 1.0) * dense_scale;
    }

    std::vector<ZipfSampler> samplers;
    samplers.reserve(n_fields);
    for (const auto& f : spec.fields) {
        samplers.emplace_back(f.categories, f.zipf_alpha);
    }

    Rng rng(derive_seed(seed, kSampleStream));
    std::vector<Sample> samples(spec.total());
    for (Sample& smp : samples) {
        smp.indices.resize(n_fields);
        for (std::size_t f = 0; f < n_fields; ++f) {
            smp.indices[f] = static_cast<std::uint32_t>(samplers[f].draw(rng));
        }
        smp.dense.resize(spec.dense_dim);
        for (float& x : smp.dense) {
            x = static_cast<float>(rng.gaussian(0.0, 1.0));
        }

        double interactions = 0.0;
        for (std::size_t f = 0; f + 1 < n_fields; ++f) {
            for (std::size_t g = f + 1; g < n_fields; ++g) {
                double dot = 0.0;
                for (std::size_t r = 0; r < h; ++r) {
                    dot += latents[f](r, smp.indices[f]) * latents[g](r, smp.indices[g]);
                }
                interactions += dot;
            }
        }
        double dense_term = 0.0;
        for (std::size_t j = 0; j < spec.dense_dim; ++j) {
            dense_term += dense_w[j] * static_cast<double>(smp.dense[j]);
        }
        double freq_term = 0.0;
        if (spec.freq_label_bias != 0.0) {
            for (std::size_t f = 0; f < n_fields; ++f) {
                // log(p(c)/p(0)) = -alpha * log(c+1) under Zipf weights.
                freq_term -= spec.fields[f].zipf_alpha *
                             std::log(static_cast<double>(smp.indices[f] + 1));
            }
            freq_term *= spec.freq_label_bias;
        }
        const double logit = spec.interaction_scale * interactions + dense_term +
                             freq_term + rng.gaussian(0.0, spec.noise_std);
        smp.label = rng.uniform() < sigmoid(logit) ? 1 : 0;
    }

    if (debug != nullptr) {
        debug->latents = latents;
        debug->dense_weights = dense_w;
    }
    return SyntheticCtrDataset(spec, seed, std::move(samples));
}

std::vector<double> frequency_scores(const SyntheticCtrDataset& ds) {
    if (ds.test_end() == ds.val_end()) {
        throw ValueError("frequency_scores: empty test split");
    }
    const auto& freq = ds.train_frequencies();
    std::vector<double> scores;
    scores.reserve(ds.test_end() - ds.val_end());
    for (std::size_t s = ds.val_end(); s < ds.test_end(); ++s) {
        double score = 1.0;
        for (std::size_t f = 0; f < ds.field_count(); ++f) {
            score *= static_cast<double>(freq[f][ds.samples()[s].indices[f]] + 1);
        }
        scores.push_back(score);
    }
    return scores;
}

Strata stratify(const SyntheticCtrDataset& ds, double fraction) {
    if (fraction <= 0.0 || fraction > 0.5) {
        throw ValueError("stratify fraction must be in (0, 0.5]");
    }
    const std::vector<double> scores = frequency_scores(ds);
    const std::size_t test_size = scores.size();
    const std::size_t take = static_cast<std::size_t>(
        std::floor(fraction * static_cast<double>(test_size)));
    if (take == 0) {
        throw ValueError("stratify: test split too small for fraction");
    }

    std::vector<std::size_t> order(test_size);
    std::iota(order.begin(), order.end(), 0);
    // Ascending score; equal scores keep ascending sample index.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] < scores[b];
    });

    Strata strata;
    strata.least_frequent.reserve(take);
    strata.most_frequent.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        strata.least_frequent.push_back(ds.val_end() + order[i]);
        strata.most_frequent.push_back(ds.val_end() + order[test_size - take + i]);
    }
    std::sort(strata.least_frequent.begin(), strata.least_frequent.end());
    std::sort(strata.most_frequent.begin(), strata.most_frequent.end());
    return strata;
}

void write_dataset(const SyntheticCtrDataset& ds, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw IoError("cannot open " + path + " for writing");
    }
    os << spec_to_json(ds.spec(), ds.seed()).dump() << "\n";
    for (const Sample& smp : ds.samples()) {
        for (std::uint32_t idx : smp.indices) {
            write_u32_le(os, idx);
        }
        for (float x : smp.dense) {
            write_f32_le(os, x);
        }
        write_u8(os, smp.label);
    }
    if (!os) {
        throw IoError("write failed: " + path);
    }
}

SyntheticCtrDataset read_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("cannot open " + path);
    }
    std::string header;
    if (!std::getline(is, header)) {
        throw IoError("missing dataset header line");
    }
    json j;
    try {
        j = json::parse(header);
    } catch (const json::exception& e) {
        throw IoError(std::string("bad dataset header: ") + e.what());
    }
    if (j.value("magic", "") != std::string("MLETDS1")) {
        throw IoError("not a dataset file (magic mismatch)");
    }
    const DatasetSpec spec = spec_from_json(j);
    const std::uint64_t seed = j.at("seed").get<std::uint64_t>();

    std::vector<Sample> samples(spec.total());
    for (Sample& smp : samples) {
        smp.indices.resize(spec.fields.size());
        for (auto& idx : smp.indices) {
            idx = read_u32_le(is);
        }
        smp.dense.resize(spec.dense_dim);
        for (float& x : smp.dense) {
            x = read_f32_le(is);
        }
        smp.label = read_u8(is);
    }
    return SyntheticCtrDataset(spec, seed, std::move(samples));
}

void write_debug_sidecar(const GeneratorDebug& debug, const std::string& path) {
    json j;
    j["dense_weights"] = debug.dense_weights;
    json lat = json::array();
    for (const Matrix& m : debug.latents) {
        lat.push_back({{"rows", m.rows()},
                       {"cols", m.cols()},
                       {"data", std::vector<double>(m.data().begin(), m.data().end())}});
    }
    j["latents"] = lat;
    std::ofstream os(path);
    if (!os) {
        throw IoError("cannot open " + path + " for writing");
    }
    os << j.dump(2) << "\n";
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

SyntheticCtrDataset import_csv(const CsvImportSpec& cfg) {
    std::ifstream is(cfg.path);
    if (!is) {
        throw IoError("cannot open " + cfg.path);
    }
    if (cfg.sparse_fields == 0) {
        throw ValueError("import_csv: need at least one sparse field");
    }
    std::vector<std::size_t> buckets = cfg.buckets;
    if (buckets.size() == 1) {
        buckets.assign(cfg.sparse_fields, buckets[0]);
    }
    if (buckets.size() != cfg.sparse_fields) {
        throw ValueError("import_csv: bucket list length does not match field count");
    }
    if (cfg.train_fraction <= 0.0 || cfg.train_fraction + cfg.val_fraction >= 1.0) {
        throw ValueError("import_csv: split fractions must leave room for a test set");
    }

    std::vector<Sample> samples;
    std::string line;
    std::size_t line_no = 0;
    char delim = cfg.delimiter;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        if (delim == 0) {
            delim = line.find('\t') != std::string::npos ? '\t' : ',';
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, delim)) {
            cells.push_back(cell);
        }
        // A trailing empty categorical cell is dropped by getline; pad.
        while (cells.size() < 1 + cfg.dense_dim + cfg.sparse_fields) {
            cells.emplace_back();
        }
        Sample smp;
        const std::string& lab = cells[0];
        if (lab != "0" && lab != "1") {
            throw IoError("line " + std::to_string(line_no) + ": label must be 0 or 1");
        }
        smp.label = lab == "1" ? 1 : 0;
        smp.dense.resize(cfg.dense_dim);
        for (std::size_t j = 0; j < cfg.dense_dim; ++j) {
            const std::string& c = cells[1 + j];
            smp.dense[j] = c.empty() ? 0.0f : std::stof(c);
        }
        smp.indices.resize(cfg.sparse_fields);
        for (std::size_t f = 0; f < cfg.sparse_fields; ++f) {
            const std::string& c = cells[1 + cfg.dense_dim + f];
            smp.indices[f] = static_cast<std::uint32_t>(fnv1a64(c) % buckets[f]);
        }
        samples.push_back(std::move(smp));
    }
    if (samples.size() < 3) {
        throw IoError("import_csv: need at least 3 rows to split");
    }

    DatasetSpec spec;
    spec.fields.clear();
    for (std::size_t f = 0; f < cfg.sparse_fields; ++f) {
        spec.fields.push_back({buckets[f], 0.0});
    }
    spec.dense_dim = cfg.dense_dim;
    spec.train_count = static_cast<std::size_t>(
        static_cast<double>(samples.size()) * cfg.train_fraction);
    spec.val_count = static_cast<std::size_t>(
        static_cast<double>(samples.size()) * cfg.val_fraction);
    spec.train_count = std::max<std::size_t>(1, spec.train_count);
    if (spec.train_count + spec.val_count >= samples.size()) {
        throw ValueError("import_csv: split fractions leave no test samples");
    }
    spec.test_count = samples.size() - spec.train_count - spec.val_count;
    // Generator-only knobs are meaningless for imported data.
    spec.noise_std = 0.0;
    spec.interaction_scale = 0.0;
    spec.latent_groups = 0;
    spec.group_noise = 0.0;
    spec.freq_label_bias = 0.0;
    return SyntheticCtrDataset(spec, 0, std::move(samples));
}

}  // namespace mlet
