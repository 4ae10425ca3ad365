#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "purikit/bundle.hpp"
#include "purikit/datasets.hpp"
#include "purikit/rng.hpp"

using namespace purikit;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
    const fs::path dir = fs::temp_directory_path() / "purikit_tests";
    fs::create_directories(dir);
    return dir / name;
}

std::vector<std::uint8_t> read_all(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// Independent oracle: classify by the nearest class centroid in pixel space.
double nearest_centroid_accuracy(const LabeledDataset& train, const LabeledDataset& test) {
    const std::size_t dim = train.images[0].tensor().data.size();
    std::vector<std::vector<double>> centroids(train.class_count, std::vector<double>(dim, 0.0));
    std::vector<int> counts(train.class_count, 0);
    for (std::size_t i = 0; i < train.size(); ++i) {
        const auto& d = train.images[i].tensor().data;
        auto& c = centroids[train.labels[i]];
        for (std::size_t j = 0; j < dim; ++j) c[j] += d[j];
        ++counts[train.labels[i]];
    }
    for (int k = 0; k < train.class_count; ++k)
        for (double& v : centroids[k]) v /= counts[k];

    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto& d = test.images[i].tensor().data;
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int k = 0; k < train.class_count; ++k) {
            double acc = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                const double diff = d[j] - centroids[k][j];
                acc += diff * diff;
            }
            if (acc < best_d) {
                best_d = acc;
                best = k;
            }
        }
        if (best == test.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace

TEST_SUITE("tensorio") {

TEST_CASE("image invariants are load-time errors") {
    Tensor t(2, 2, 1);
    t.data = {0.0, 0.5, 1.0, 1.5};
    CHECK_THROWS_AS(Image::checked(t), std::invalid_argument);
    t.data = {0.0, 0.5, 1.0, 1.0};
    CHECK_NOTHROW(Image::checked(t));
    Tensor bad_len(2, 2, 1);
    bad_len.data.resize(3);
    CHECK_THROWS_AS(Image::checked(bad_len), std::invalid_argument);
}

TEST_CASE("bundle round trip is bit-exact for every dtype") {
    Rng rng(11);
    std::vector<double> f64(37);
    for (double& v : f64) v = rng.normal();
    std::vector<float> f32(16);
    for (float& v : f32) v = static_cast<float>(rng.normal());
    std::vector<std::int64_t> i64 = {-5, 0, 1, 1234567890123LL};
    std::vector<std::int32_t> i32 = {-7, 42};

    ArtifactBundle b;
    b.manifest()["note"] = "round trip";
    b.put_f64("a", {37}, f64);
    b.put_f32("b", {4, 4}, f32);
    b.put_i64("c", {4}, i64);
    b.put_i32("d", {2}, i32);

    const fs::path path = temp_file("roundtrip.pkit");
    save_bundle(b, path);
    const ArtifactBundle loaded = load_bundle(path);

    CHECK(loaded.manifest()["note"] == "round trip");
    CHECK(loaded.f64("a") == f64);
    CHECK(loaded.f32("b") == f32);
    CHECK(loaded.i64("c") == i64);
    CHECK(loaded.i32("d") == i32);
    CHECK(loaded.shape("b") == std::vector<std::uint64_t>{4, 4});

    // Saving the loaded bundle reproduces the file byte for byte.
    const fs::path path2 = temp_file("roundtrip2.pkit");
    save_bundle(loaded, path2);
    CHECK(read_all(path) == read_all(path2));
}

TEST_CASE("corrupted payload fails the checksum") {
    ArtifactBundle b;
    b.put_f64("xs", {3}, {1.0, 2.0, 3.0});
    const fs::path path = temp_file("corrupt.pkit");
    save_bundle(b, path);

    auto bytes = read_all(path);
    bytes[bytes.size() - 12] ^= 0x01;  // flip a payload byte
    write_all(path, bytes);
    CHECK_THROWS_WITH_AS(static_cast<void>(load_bundle(path)),
                         doctest::Contains("checksum"), std::runtime_error);
}

TEST_CASE("unknown version and bad magic are rejected") {
    ArtifactBundle b;
    b.put_f64("xs", {1}, {4.0});
    const fs::path path = temp_file("version.pkit");
    save_bundle(b, path);
    auto bytes = read_all(path);
    bytes[4] = 99;  // version field
    write_all(path, bytes);
    CHECK_THROWS_WITH_AS(static_cast<void>(load_bundle(path)),
                         doctest::Contains("version"), std::runtime_error);
    bytes[4] = 1;
    bytes[0] = 'X';
    write_all(path, bytes);
    CHECK_THROWS_WITH_AS(static_cast<void>(load_bundle(path)),
                         doctest::Contains("magic"), std::runtime_error);
}

TEST_CASE("empty bundle (manifest only) round trips") {
    ArtifactBundle b;
    b.manifest()["only"] = 1;
    const fs::path path = temp_file("empty.pkit");
    save_bundle(b, path);
    const ArtifactBundle loaded = load_bundle(path);
    CHECK(loaded.array_count() == 0);
    CHECK(loaded.manifest()["only"] == 1);
}

TEST_CASE("shape/payload disagreement is rejected at put time") {
    ArtifactBundle b;
    CHECK_THROWS_AS(b.put_f64("bad", {2, 3}, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("synthetic generation is a pure function of its arguments") {
    const LabeledDataset a = generate_synthetic_dataset(2, 5, 16, 0.0, 7);
    const LabeledDataset b = generate_synthetic_dataset(2, 5, 16, 0.0, 7);
    REQUIRE(a.size() == 10);
    CHECK(a.class_count == 2);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.labels[i] == b.labels[i]);
        CHECK(a.images[i].tensor().data == b.images[i].tensor().data);
    }

    const LabeledDataset c = generate_synthetic_dataset(2, 5, 16, 0.0, 8);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size() && !any_diff; ++i)
        any_diff = a.images[i].tensor().data != c.images[i].tensor().data;
    CHECK(any_diff);
}

TEST_CASE("nearest-centroid oracle clears 80% on the 4-class generator") {
    const LabeledDataset train = generate_synthetic_dataset(4, 100, 16, 0.05, 1);
    const LabeledDataset held_out = generate_synthetic_dataset(4, 40, 16, 0.05, 2);
    CHECK(nearest_centroid_accuracy(train, held_out) > 0.80);
}

TEST_CASE("generator rejects more classes than shape families") {
    CHECK_THROWS_AS(static_cast<void>(generate_synthetic_dataset(6, 3, 16, 0.0, 1)),
                    std::invalid_argument);
    CHECK_THROWS_AS(static_cast<void>(generate_synthetic_dataset(1, 3, 16, 0.0, 1)),
                    std::invalid_argument);
    CHECK_THROWS_AS(static_cast<void>(generate_synthetic_dataset(2, 3, 4, 0.0, 1)),
                    std::invalid_argument);
}

TEST_CASE("cifar10 loader handles the declared record layout") {
    // Two records: label 3 with all pixels 255, label 9 with all pixels 0.
    std::vector<std::uint8_t> bytes(2 * 3073, 0);
    bytes[0] = 3;
    for (std::size_t i = 1; i < 3073; ++i) bytes[i] = 255;
    bytes[3073] = 9;
    const fs::path path = temp_file("cifar_two.bin");
    write_all(path, bytes);

    const LabeledDataset ds = load_cifar10_binary(path);
    REQUIRE(ds.size() == 2);
    CHECK(ds.labels[0] == 3);
    CHECK(ds.labels[1] == 9);
    CHECK(ds.images[0].at(0, 0, 0) == 1.0);  // byte 255 -> exactly 1.0
    CHECK(ds.images[0].at(31, 31, 2) == 1.0);
    CHECK(ds.images[1].at(5, 5, 1) == 0.0);

    const LabeledDataset limited = load_cifar10_binary(path, 1);
    CHECK(limited.size() == 1);
}

TEST_CASE("cifar10 loader names the byte offset of a truncated record") {
    std::vector<std::uint8_t> bytes(3074, 0);
    const fs::path path = temp_file("cifar_trunc.bin");
    write_all(path, bytes);
    CHECK_THROWS_WITH_AS(static_cast<void>(load_cifar10_binary(path)),
                         doctest::Contains("offset 3073"), std::runtime_error);
}

TEST_CASE("cifar10 channel planes map to interleaved memory") {
    std::vector<std::uint8_t> bytes(3073, 0);
    bytes[0] = 0;
    bytes[1] = 10;               // R plane, pixel (0,0)
    bytes[1 + 1024] = 20;        // G plane, pixel (0,0)
    bytes[1 + 2048] = 30;        // B plane, pixel (0,0)
    bytes[1 + 33] = 40;          // R plane, pixel (1,1)
    const fs::path path = temp_file("cifar_planes.bin");
    write_all(path, bytes);
    const LabeledDataset ds = load_cifar10_binary(path);
    CHECK(ds.images[0].at(0, 0, 0) == doctest::Approx(10.0 / 255.0));
    CHECK(ds.images[0].at(0, 0, 1) == doctest::Approx(20.0 / 255.0));
    CHECK(ds.images[0].at(0, 0, 2) == doctest::Approx(30.0 / 255.0));
    CHECK(ds.images[0].at(1, 1, 0) == doctest::Approx(40.0 / 255.0));
}

}  // TEST_SUITE
