#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "mlet/errors.hpp"
#include "mlet/synth_data.hpp"

using namespace mlet;
namespace fs = std::filesystem;

namespace {

DatasetSpec small_spec() {
    DatasetSpec spec;
    spec.fields = {{50, 1.2}, {50, 1.2}};
    spec.dense_dim = 2;
    spec.train_count = 4000;
    spec.val_count = 400;
    spec.test_count = 400;
    spec.latent_dim = 4;
    spec.latent_groups = 8;
    return spec;
}

std::string read_file_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is);
    return std::string(std::istreambuf_iterator<char>(is),
                       std::istreambuf_iterator<char>());
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("mlet_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("zipf alpha=0 draws are uniform within 3-sigma multinomial bounds") {
    DatasetSpec spec;
    spec.fields = {{10, 0.0}};
    spec.dense_dim = 0;
    spec.train_count = 100000;
    spec.val_count = 1;
    spec.test_count = 1;
    spec.latent_dim = 2;
    spec.latent_groups = 0;
    const SyntheticCtrDataset ds = generate_dataset(spec, 6);
    const auto& freq = ds.train_frequencies()[0];
    const double n = 100000.0, p = 0.1;
    const double sigma = std::sqrt(n * p * (1 - p));
    for (std::size_t c = 0; c < 10; ++c) {
        CHECK(std::abs(static_cast<double>(freq[c]) - n * p) <= 3.0 * sigma);
    }
}

TEST_CASE("zipf alpha=1.2 concentrates mass on the head") {
    DatasetSpec spec;
    spec.fields = {{1000, 1.2}};
    spec.dense_dim = 0;
    spec.train_count = 50000;
    spec.val_count = 1;
    spec.test_count = 1;
    spec.latent_dim = 2;
    const SyntheticCtrDataset ds = generate_dataset(spec, 7);
    const auto& freq = ds.train_frequencies()[0];
    std::uint64_t top10 = 0, bottom500 = 0;
    for (std::size_t c = 0; c < 10; ++c) {
        top10 += freq[c];
    }
    for (std::size_t c = 500; c < 1000; ++c) {
        bottom500 += freq[c];
    }
    CHECK(top10 > bottom500);
}

TEST_CASE("same seed gives a byte-identical dataset file") {
    const DatasetSpec spec = small_spec();
    TempDir dir;
    write_dataset(generate_dataset(spec, 11), dir.file("a.bin"));
    write_dataset(generate_dataset(spec, 11), dir.file("b.bin"));
    write_dataset(generate_dataset(spec, 12), dir.file("c.bin"));
    CHECK(read_file_bytes(dir.file("a.bin")) == read_file_bytes(dir.file("b.bin")));
    CHECK(read_file_bytes(dir.file("a.bin")) != read_file_bytes(dir.file("c.bin")));
}

TEST_CASE("dataset file round-trips") {
    const DatasetSpec spec = small_spec();
    const SyntheticCtrDataset ds = generate_dataset(spec, 13);
    TempDir dir;
    write_dataset(ds, dir.file("ds.bin"));
    const SyntheticCtrDataset back = read_dataset(dir.file("ds.bin"));
    REQUIRE(back.samples().size() == ds.samples().size());
    CHECK(back.seed() == 13);
    CHECK(back.spec().fields[0].categories == 50);
    for (std::size_t i = 0; i < ds.samples().size(); i += 97) {
        CHECK(back.samples()[i].indices == ds.samples()[i].indices);
        CHECK(back.samples()[i].dense == ds.samples()[i].dense);
        CHECK(back.samples()[i].label == ds.samples()[i].label);
    }
    CHECK(back.train_frequencies() == ds.train_frequencies());
}

TEST_CASE("reader rejects truncated dataset files") {
    const DatasetSpec spec = small_spec();
    const SyntheticCtrDataset ds = generate_dataset(spec, 15);
    TempDir dir;
    write_dataset(ds, dir.file("full.bin"));
    std::string bytes = read_file_bytes(dir.file("full.bin"));
    bytes.resize(bytes.size() / 2);
    {
        std::ofstream os(dir.file("cut.bin"), std::ios::binary);
        os << bytes;
    }
    CHECK_THROWS_AS(read_dataset(dir.file("cut.bin")), IoError);
}

TEST_CASE("every index stays below its field cardinality") {
    const SyntheticCtrDataset ds = generate_dataset(small_spec(), 17);
    ds.validate();  // full scan
    for (const auto& smp : ds.samples()) {
        for (std::size_t f = 0; f < 2; ++f) {
            CHECK(smp.indices[f] < 50);
        }
    }
}

TEST_CASE("labels are 0/1 with a positive rate inside (0,1)") {
    const SyntheticCtrDataset ds = generate_dataset(small_spec(), 19);
    std::size_t pos = 0;
    for (const auto& smp : ds.samples()) {
        REQUIRE(smp.label <= 1);
        pos += smp.label;
    }
    CHECK(pos > 0);
    CHECK(pos < ds.samples().size());
}

TEST_CASE("frequency scores come from the train split only, Laplace smoothed") {
    DatasetSpec spec;
    spec.fields = {{6, 0.0}};
    spec.dense_dim = 0;
    spec.train_count = 3;
    spec.val_count = 1;
    spec.test_count = 2;
    spec.latent_dim = 2;
    std::vector<Sample> samples(6);
    // Train: categories 0, 0, 1. Val: 5. Test: 0 and 4 (4 unseen in train).
    const std::uint32_t cats[6] = {0, 0, 1, 5, 0, 4};
    for (std::size_t i = 0; i < 6; ++i) {
        samples[i].indices = {cats[i]};
        samples[i].label = i % 2;
    }
    const SyntheticCtrDataset ds(spec, 0, samples);
    const auto scores = frequency_scores(ds);
    REQUIRE(scores.size() == 2);
    CHECK(scores[0] == 3.0);  // count 2, add-1
    CHECK(scores[1] == 1.0);  // unseen, add-1 keeps it positive
}

TEST_CASE("stratify partitions the test split deterministically") {
    DatasetSpec spec = small_spec();
    spec.test_count = 1000;
    const SyntheticCtrDataset ds = generate_dataset(spec, 23);
    const Strata strata = stratify(ds, 0.10);
    CHECK(strata.most_frequent.size() == 100);
    CHECK(strata.least_frequent.size() == 100);

    std::set<std::size_t> seen(strata.most_frequent.begin(),
                               strata.most_frequent.end());
    for (std::size_t idx : strata.least_frequent) {
        CHECK(seen.count(idx) == 0);
        seen.insert(idx);
    }
    CHECK(seen.size() == 200);
    for (std::size_t idx : seen) {
        CHECK(idx >= ds.val_end());
        CHECK(idx < ds.test_end());
    }

    const Strata again = stratify(ds, 0.10);
    CHECK(again.most_frequent == strata.most_frequent);
    CHECK(again.least_frequent == strata.least_frequent);
}

TEST_CASE("a sample querying only rank-1 categories lands in the frequent slice") {
    DatasetSpec spec;
    spec.fields = {{10, 0.0}, {10, 0.0}};
    spec.dense_dim = 0;
    spec.train_count = 9;
    spec.val_count = 1;
    spec.test_count = 10;
    spec.latent_dim = 2;
    std::vector<Sample> samples(20);
    // Train counts: category 0 five times, 1 three times, 2 once.
    for (std::size_t i = 0; i < 9; ++i) {
        const std::uint32_t c = i < 5 ? 0 : (i < 8 ? 1 : 2);
        samples[i].indices = {c, c};
    }
    samples[9].indices = {0, 0};  // val
    // Test: sample t queries category (t, t); 0 is the most frequent in
    // train, anything >= 3 unseen.
    for (std::size_t t = 0; t < 10; ++t) {
        samples[10 + t].indices = {static_cast<std::uint32_t>(t),
                                   static_cast<std::uint32_t>(t)};
        samples[10 + t].label = t % 2;
    }
    const SyntheticCtrDataset ds(spec, 0, samples);
    const Strata strata = stratify(ds, 0.10);
    REQUIRE(strata.most_frequent.size() == 1);
    REQUIRE(strata.least_frequent.size() == 1);
    // Test sample 0 queries only rank-1 categories -> frequent slice.
    CHECK(strata.most_frequent[0] == 10);
    // Ties at score 1 among unseen categories break by sample index.
    CHECK(strata.least_frequent[0] == 13);
}

TEST_CASE("frequency-biased generator clicks rare categories less") {
    DatasetSpec spec;
    spec.fields = {{200, 1.2}};
    spec.dense_dim = 0;
    spec.train_count = 30000;
    spec.val_count = 100;
    spec.test_count = 5000;
    spec.latent_dim = 4;
    spec.freq_label_bias = 0.6;
    const SyntheticCtrDataset ds = generate_dataset(spec, 31);
    const Strata strata = stratify(ds, 0.10);
    auto rate = [&](const std::vector<std::size_t>& ids) {
        double pos = 0.0;
        for (std::size_t id : ids) {
            pos += ds.samples()[id].label;
        }
        return pos / static_cast<double>(ids.size());
    };
    CHECK(rate(strata.least_frequent) < rate(strata.most_frequent));
}

TEST_CASE("the default spec totals 240k records") {
    const DatasetSpec spec;
    CHECK(spec.total() == 240000);
    CHECK(spec.fields.size() == 2);
    CHECK(spec.fields[0].categories == 1000);
    CHECK(spec.fields[0].zipf_alpha == 1.2);
    CHECK(spec.dense_dim == 4);
}

TEST_CASE("generator rejects degenerate specs") {
    DatasetSpec spec = small_spec();
    spec.fields[0].categories = 1;
    CHECK_THROWS_AS(generate_dataset(spec, 1), ValueError);
}

TEST_CASE("csv import hashes strings and splits by fractions") {
    TempDir dir;
    {
        std::ofstream os(dir.file("data.csv"));
        // label, 2 dense, 2 categorical
        os << "1,0.5,1.5,apple,red\n";
        os << "0,0.25,,banana,yellow\n";
        os << "1,,2.5,apple,green\n";
        os << "0,1.0,0.5,cherry,red\n";
        os << "1,2.0,1.0,apple,red\n";
    }
    CsvImportSpec cfg;
    cfg.path = dir.file("data.csv");
    cfg.dense_dim = 2;
    cfg.sparse_fields = 2;
    cfg.buckets = {32};
    cfg.train_fraction = 0.6;
    cfg.val_fraction = 0.2;
    const SyntheticCtrDataset ds = import_csv(cfg);
    REQUIRE(ds.samples().size() == 5);
    CHECK(ds.spec().train_count == 3);
    CHECK(ds.spec().val_count == 1);
    CHECK(ds.spec().test_count == 1);
    // Same strings hash to the same bucket, deterministically.
    CHECK(ds.samples()[0].indices[0] == ds.samples()[2].indices[0]);
    CHECK(ds.samples()[0].indices[0] ==
          static_cast<std::uint32_t>(fnv1a64("apple") % 32));
    CHECK(ds.samples()[0].indices[1] == ds.samples()[3].indices[1]);
    // Missing dense values become zero.
    CHECK(ds.samples()[1].dense[1] == 0.0f);
    CHECK(ds.samples()[2].dense[0] == 0.0f);
}
