#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"

#include "acs/dataset.hpp"
#include "acs/errors.hpp"
#include "test_util.hpp"

using namespace acs;

namespace {

void write_be32(std::ofstream& out, std::uint32_t v) {
    const unsigned char bytes[4] = {
        static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

void write_idx_images(const std::string& path,
                      const std::vector<std::vector<unsigned char>>& images,
                      std::uint32_t rows, std::uint32_t cols,
                      std::uint32_t magic = 0x00000803u) {
    std::ofstream out(path, std::ios::binary);
    write_be32(out, magic);
    write_be32(out, static_cast<std::uint32_t>(images.size()));
    write_be32(out, rows);
    write_be32(out, cols);
    for (const auto& img : images) {
        out.write(reinterpret_cast<const char*>(img.data()),
                  static_cast<std::streamsize>(img.size()));
    }
}

void write_idx_labels(const std::string& path,
                      const std::vector<unsigned char>& labels,
                      std::uint32_t magic = 0x00000801u) {
    std::ofstream out(path, std::ios::binary);
    write_be32(out, magic);
    write_be32(out, static_cast<std::uint32_t>(labels.size()));
    out.write(reinterpret_cast<const char*>(labels.data()),
              static_cast<std::streamsize>(labels.size()));
}

SyntheticSpec small_spec() {
    SyntheticSpec spec;
    spec.classes = 3;
    spec.dims = 4;
    spec.per_class = 20;
    spec.spread = 0.5;
    spec.seed = 99;
    return spec;
}

} // namespace

TEST_CASE("synthetic generation is shaped and reproducible") {
    const Dataset a = make_synthetic(small_spec());
    const Dataset b = make_synthetic(small_spec());
    REQUIRE(a.size() == 60);
    CHECK(a.num_classes == 3);
    CHECK(a.feature_dim() == 4);
    CHECK(a.samples[0].id == 0);
    CHECK(a.samples[59].id == 59);
    a.validate();
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.samples[i].features == b.samples[i].features);
        CHECK(a.samples[i].label == b.samples[i].label);
    }

    SyntheticSpec other = small_spec();
    other.seed = 100;
    const Dataset c = make_synthetic(other);
    CHECK(a.samples[0].features != c.samples[0].features);
}

TEST_CASE("gathering features and labels follows id order") {
    const Dataset d = make_synthetic(small_spec());
    const Tensor2 x = d.gather_features({5, 2});
    CHECK(x.rows == 2);
    CHECK(x.cols == 4);
    CHECK(x.at(0, 0) == d.samples[5].features[0]);
    CHECK(x.at(1, 3) == d.samples[2].features[3]);

    const Tensor2 y = d.gather_labels({7});
    CHECK(y.at(0, static_cast<std::size_t>(d.samples[7].label)) == 1.0);

    CHECK_THROWS_AS(d.gather_features({60}), InputError);
    CHECK_THROWS_AS(d.gather_labels({99}), InputError);
}

TEST_CASE("validation catches inconsistent datasets") {
    Dataset d = make_synthetic(small_spec());
    d.samples[3].id = 40;
    CHECK_THROWS_AS(d.validate(), InputError);

    Dataset e = make_synthetic(small_spec());
    e.samples[0].label = 3;
    CHECK_THROWS_AS(e.validate(), InputError);

    Dataset f = make_synthetic(small_spec());
    f.samples[1].features.push_back(0.0);
    CHECK_THROWS_AS(f.validate(), DimensionError);
}

TEST_CASE("idx image and label files load with scaled pixels") {
    testutil::TempDir tmp;
    const std::vector<std::vector<unsigned char>> images = {
        {0, 51, 102, 153}, {204, 255, 0, 128}};
    write_idx_images(tmp.file("img"), images, 2, 2);
    write_idx_labels(tmp.file("lab"), {1, 0});

    const Dataset d = load_idx(tmp.file("img"), tmp.file("lab"));
    REQUIRE(d.size() == 2);
    CHECK(d.feature_dim() == 4);
    // The idx family always carries the ten digit classes, even when a
    // slice of the data happens to use fewer.
    CHECK(d.num_classes == 10);
    CHECK(d.samples[0].label_one_hot.size() == 10);
    CHECK(d.samples[0].features[1] == doctest::Approx(51.0 / 255.0));
    CHECK(d.samples[1].features[0] == doctest::Approx(204.0 / 255.0));
    CHECK(d.samples[0].label == 1);
    CHECK(d.samples[1].label == 0);
}

TEST_CASE("idx loader names the byte offset of a bad magic") {
    testutil::TempDir tmp;
    write_idx_images(tmp.file("img"), {{1, 2, 3, 4}}, 2, 2, 0xdeadbeefu);
    write_idx_labels(tmp.file("lab"), {0});
    try {
        load_idx(tmp.file("img"), tmp.file("lab"));
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("offset") != std::string::npos);
    }
}

TEST_CASE("idx loader rejects truncation and count mismatch") {
    testutil::TempDir tmp;
    {
        std::ofstream out(tmp.file("img"), std::ios::binary);
        write_be32(out, 0x00000803u);
        write_be32(out, 2);
        write_be32(out, 2);
        write_be32(out, 2);
        const unsigned char partial[3] = {9, 9, 9};
        out.write(reinterpret_cast<const char*>(partial), 3);
    }
    write_idx_labels(tmp.file("lab"), {0, 1});
    CHECK_THROWS_AS(load_idx(tmp.file("img"), tmp.file("lab")), FormatError);

    write_idx_images(tmp.file("img2"), {{1, 2, 3, 4}}, 2, 2);
    write_idx_labels(tmp.file("lab2"), {0, 1});
    CHECK_THROWS_AS(load_idx(tmp.file("img2"), tmp.file("lab2")), FormatError);
}

TEST_CASE("cifar batches parse labeled records") {
    testutil::TempDir tmp;
    std::vector<unsigned char> record(3073, 0);
    record[0] = 7;
    for (std::size_t i = 1; i < record.size(); ++i) {
        record[i] = static_cast<unsigned char>(i % 251);
    }
    std::vector<unsigned char> record2(3073, 0);
    record2[0] = 2;
    {
        std::ofstream out(tmp.file("batch.bin"), std::ios::binary);
        out.write(reinterpret_cast<const char*>(record.data()), 3073);
        out.write(reinterpret_cast<const char*>(record2.data()), 3073);
    }
    const Dataset d = load_cifar10({tmp.file("batch.bin")});
    REQUIRE(d.size() == 2);
    CHECK(d.num_classes == 10);
    CHECK(d.feature_dim() == 3072);
    CHECK(d.samples[0].label == 7);
    CHECK(d.samples[1].label == 2);
    CHECK(d.samples[0].features[0] == doctest::Approx(1.0 / 255.0));
}

TEST_CASE("cifar loader rejects ragged files and bad labels") {
    testutil::TempDir tmp;
    {
        std::ofstream out(tmp.file("ragged.bin"), std::ios::binary);
        const std::vector<unsigned char> bytes(3072, 1);
        out.write(reinterpret_cast<const char*>(bytes.data()), 3072);
    }
    CHECK_THROWS_AS(load_cifar10({tmp.file("ragged.bin")}), FormatError);

    {
        std::ofstream out(tmp.file("badlabel.bin"), std::ios::binary);
        std::vector<unsigned char> record(3073, 0);
        record[0] = 10;
        out.write(reinterpret_cast<const char*>(record.data()), 3073);
    }
    CHECK_THROWS_AS(load_cifar10({tmp.file("badlabel.bin")}), FormatError);
}

TEST_CASE("native dataset files round trip bit exactly") {
    testutil::TempDir tmp;
    Dataset d = make_synthetic(small_spec());
    d = inject_label_noise(std::move(d), 0.1, 7);
    save_dataset(d, tmp.file("data.bin"));
    const Dataset back = load_dataset_file(tmp.file("data.bin"));
    REQUIRE(back.size() == d.size());
    CHECK(back.num_classes == d.num_classes);
    CHECK(back.noisy_ids == d.noisy_ids);
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(back.samples[i].features == d.samples[i].features);
        CHECK(back.samples[i].label == d.samples[i].label);
    }
}

TEST_CASE("native loader rejects foreign bytes") {
    testutil::TempDir tmp;
    {
        std::ofstream out(tmp.file("junk.bin"), std::ios::binary);
        out << "not a dataset";
    }
    CHECK_THROWS_AS(load_dataset_file(tmp.file("junk.bin")), FormatError);
}

TEST_CASE("label noise flips an exact count to different labels") {
    Dataset d = make_synthetic(small_spec());
    const Dataset clean = d;
    d = inject_label_noise(std::move(d), 0.25, 11);
    CHECK(d.noisy_ids.size() == 15);
    for (std::size_t id : d.noisy_ids) {
        CHECK(d.samples[id].label != clean.samples[id].label);
        CHECK(d.samples[id].label >= 0);
        CHECK(d.samples[id].label < d.num_classes);
        CHECK(d.samples[id].label_one_hot[static_cast<std::size_t>(
                  d.samples[id].label)] == 1.0);
    }
    for (std::size_t id = 0; id < d.size(); ++id) {
        if (d.noisy_ids.count(id) == 0) {
            CHECK(d.samples[id].label == clean.samples[id].label);
        }
    }

    Dataset again = make_synthetic(small_spec());
    again = inject_label_noise(std::move(again), 0.25, 11);
    CHECK(again.noisy_ids == d.noisy_ids);

    CHECK_THROWS_AS(inject_label_noise(std::move(d), 0.1, 3), StateError);
}

TEST_CASE("noise fraction bounds") {
    Dataset d = make_synthetic(small_spec());
    CHECK_THROWS_AS(inject_label_noise(std::move(d), 1.5, 1), ConfigError);
    Dataset e = make_synthetic(small_spec());
    CHECK_THROWS_AS(inject_label_noise(std::move(e), -0.1, 1), ConfigError);
    Dataset f = make_synthetic(small_spec());
    f = inject_label_noise(std::move(f), 0.0, 1);
    CHECK(f.noisy_ids.empty());
}

TEST_CASE("pruned-set recall counts flipped samples removed") {
    Dataset d = make_synthetic(small_spec());
    d = inject_label_noise(std::move(d), 0.2, 5);
    const std::vector<std::size_t> all(d.noisy_ids.begin(), d.noisy_ids.end());
    CHECK(noisy_recall(all, d.noisy_ids) == doctest::Approx(1.0));
    CHECK(noisy_recall({}, d.noisy_ids) == doctest::Approx(0.0));
    const std::vector<std::size_t> half(all.begin(),
                                        all.begin() + static_cast<long>(
                                                          all.size() / 2));
    CHECK(noisy_recall(half, d.noisy_ids) ==
          doctest::Approx(0.5).epsilon(0.01));
    CHECK_THROWS_AS(noisy_recall(all, {}), InputError);
}

TEST_CASE("train test split is disjoint, contiguous and seed stable") {
    SyntheticSpec spec = small_spec();
    spec.per_class = 40;
    const Dataset pool = make_synthetic(spec);
    const auto [train, test] = split_train_test(pool, 0.25, 17);
    CHECK(train.size() == 90);
    CHECK(test.size() == 30);
    train.validate();
    test.validate();

    // No feature vector may appear on both sides.
    std::set<std::vector<double>> train_rows;
    for (const auto& s : train.samples) train_rows.insert(s.features);
    for (const auto& s : test.samples) {
        CHECK(train_rows.count(s.features) == 0);
    }

    const auto [train2, test2] = split_train_test(pool, 0.25, 17);
    for (std::size_t i = 0; i < train.size(); ++i) {
        CHECK(train.samples[i].features == train2.samples[i].features);
    }

    const auto [train3, _] = split_train_test(pool, 0.25, 18);
    bool any_diff = false;
    for (std::size_t i = 0; i < train.size(); ++i) {
        if (train.samples[i].features != train3.samples[i].features) {
            any_diff = true;
            break;
        }
    }
    CHECK(any_diff);
}

TEST_CASE("splitting after noise injection is refused") {
    Dataset d = make_synthetic(small_spec());
    d = inject_label_noise(std::move(d), 0.1, 3);
    CHECK_THROWS_AS(split_train_test(d, 0.2, 1), StateError);
}

TEST_CASE("split fraction bounds") {
    const Dataset d = make_synthetic(small_spec());
    CHECK_THROWS_AS(split_train_test(d, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(split_train_test(d, 1.0, 1), ConfigError);
}
