#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "purikit/artifacts.hpp"
#include "purikit/datasets.hpp"
#include "purikit/pipeline.hpp"
#include "purikit/rng.hpp"

using namespace purikit;
namespace fs = std::filesystem;

namespace {

// Small, fast fixture shared across the pipeline tests: a 2-class synthetic
// task, a trained baseline, and an SRD built from it.
struct Fixture {
    LabeledDataset train;
    LabeledDataset eval;
    TrainResult baseline;
    SrdConfig srd_cfg;
    SemanticReconstructionDictionary phi;

    Fixture() {
        train = generate_synthetic_dataset(2, 60, 16, 0.03, 51);
        eval = generate_synthetic_dataset(2, 10, 16, 0.03, 52);
        TrainConfig tc;
        tc.epochs = 30;
        tc.batch_size = 8;
        tc.learning_rate = 0.05;
        tc.seed = 53;
        baseline = train_baseline(train, tc);

        srd_cfg.psi_max = 3;
        srd_cfg.atom_count = 8;
        srd_cfg.filter_size = 5;
        srd_cfg.lambda_l1 = 0.05;
        srd_cfg.admm.max_iters = 80;
        srd_cfg.cdl_outer_iters = 6;
        srd_cfg.seed = 54;
        phi = build_srd(baseline.params, train, srd_cfg);
    }
};

const Fixture& fixture() {
    static Fixture f;
    return f;
}

fs::path temp_dir(const char* name) {
    const fs::path dir = fs::temp_directory_path() / "purikit_tests" / name;
    fs::create_directories(dir);
    return dir;
}

std::vector<std::uint8_t> read_all(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("single-blob classes yield exactly one entry per class") {
    // Planted structure: every image of a class is identical, so the class
    // latents are a point mass and the elbow must pick one cluster.
    const LabeledDataset base = generate_synthetic_dataset(2, 1, 16, 0.0, 90);
    LabeledDataset planted;
    planted.class_count = 2;
    for (int c = 0; c < 2; ++c)
        for (int rep = 0; rep < 5; ++rep) {
            planted.images.push_back(base.images[c]);
            planted.labels.push_back(c);
        }

    TrainConfig tc;
    tc.epochs = 2;
    tc.seed = 91;
    const TrainResult net = train_baseline(planted, tc);

    SrdConfig cfg;
    cfg.psi_max = 3;
    cfg.atom_count = 4;
    cfg.filter_size = 5;
    cfg.admm.max_iters = 60;
    cfg.cdl_outer_iters = 4;
    cfg.seed = 92;
    const SemanticReconstructionDictionary phi = build_srd(net.params, planted, cfg);
    CHECK(phi.entries.size() == 2);
    for (const auto& e : phi.entries) CHECK(e.member_ids.size() == 5);
}

TEST_CASE("entry count matches an independent per-class elbow run") {
    const Fixture& f = fixture();

    bool any_merge = false;
    for (const auto& d : f.phi.diagnostics)
        if (d.find("merged") != std::string::npos) any_merge = true;

    if (!any_merge) {
        int expected_entries = 0;
        for (int c = 0; c < f.train.class_count; ++c) {
            std::vector<LatentVector> latents;
            for (std::size_t i = 0; i < f.train.size(); ++i)
                if (f.train.labels[i] == c)
                    latents.push_back(forward(f.baseline.params, f.train.images[i].tensor()).latent);
            const auto sel = select_cluster_count(latents, f.srd_cfg.psi_max,
                                                  derive_seed(f.srd_cfg.seed, 0xE1B0, c));
            expected_entries += sel.psi_star;
        }
        CHECK(static_cast<int>(f.phi.entries.size()) == expected_entries);
    }
    CHECK(f.phi.entries.size() >= 2);
}

TEST_CASE("member ids partition the dataset") {
    const Fixture& f = fixture();
    CHECK_NOTHROW(f.phi.validate_partition(f.train.size()));
    std::size_t total = 0;
    for (const auto& e : f.phi.entries) {
        total += e.member_ids.size();
        for (std::int64_t id : e.member_ids)
            CHECK(f.train.labels[static_cast<std::size_t>(id)] == e.class_id);
    }
    CHECK(total == f.train.size());
}

TEST_CASE("every entry dictionary was learned from at least 2 members") {
    const Fixture& f = fixture();
    for (const auto& e : f.phi.entries) {
        CHECK(e.member_ids.size() >= 2);
        CHECK(e.dictionary.atom_count == f.srd_cfg.atom_count);
        CHECK(e.dictionary.max_atom_norm() <= 1.0 + 1e-9);
    }
}

TEST_CASE("rebuilding with identical inputs gives a bit-identical bundle") {
    const Fixture& f = fixture();
    const SemanticReconstructionDictionary again =
        build_srd(f.baseline.params, f.train, f.srd_cfg);

    const fs::path dir = temp_dir("srd_determinism");
    save_bundle(srd_to_bundle(f.phi), dir / "a.pkit");
    save_bundle(srd_to_bundle(again), dir / "b.pkit");
    CHECK(read_all(dir / "a.pkit") == read_all(dir / "b.pkit"));
}

TEST_CASE("srd bundle round trip preserves the dictionary") {
    const Fixture& f = fixture();
    const fs::path dir = temp_dir("srd_roundtrip");
    save_bundle(srd_to_bundle(f.phi), dir / "srd.pkit");
    const SemanticReconstructionDictionary loaded = srd_from_bundle(load_bundle(dir / "srd.pkit"));
    REQUIRE(loaded.entries.size() == f.phi.entries.size());
    for (std::size_t i = 0; i < loaded.entries.size(); ++i) {
        CHECK(loaded.entries[i].member_ids == f.phi.entries[i].member_ids);
        CHECK(loaded.entries[i].distribution.mean == f.phi.entries[i].distribution.mean);
        CHECK(loaded.entries[i].dictionary.atoms[0].data == f.phi.entries[i].dictionary.atoms[0].data);
        CHECK(loaded.entries[i].distribution.pseudo_flag == f.phi.entries[i].distribution.pseudo_flag);
    }
}

TEST_CASE("match_cluster picks the zero-distance cluster and honors ties") {
    SemanticReconstructionDictionary phi;
    auto make_entry = [](int cls, int idx, LatentVector mean) {
        SrdEntry e;
        e.class_id = cls;
        e.cluster_index = idx;
        e.distribution.mean = std::move(mean);
        e.distribution.covariance = Matrix::identity(2);
        e.distribution.inverse = Matrix::identity(2);
        return e;
    };
    phi.entries.push_back(make_entry(0, 0, {0.0, 0.0}));
    phi.entries.push_back(make_entry(1, 0, {4.0, 0.0}));

    // r = mean of one cluster, the other at distance 4.
    CHECK(match_cluster({0.0, 0.0}, phi).entry->class_id == 0);
    // (1,0): distances 1 and 3.
    CHECK(match_cluster({1.0, 0.0}, phi).entry->class_id == 0);
    CHECK(match_cluster({3.5, 0.0}, phi).entry->class_id == 1);

    // Singleton dictionary matches regardless of r.
    SemanticReconstructionDictionary one;
    one.entries.push_back(make_entry(1, 0, {9.0, 9.0}));
    CHECK(match_cluster({-100.0, 3.0}, one).entry->class_id == 1);

    // Equidistant tie breaks toward the smaller (class_id, cluster_index),
    // independent of storage order.
    SemanticReconstructionDictionary tie;
    tie.entries.push_back(make_entry(1, 0, {2.0, 0.0}));
    tie.entries.push_back(make_entry(0, 0, {0.0, 0.0}));
    const ClusterMatch m = match_cluster({1.0, 0.0}, tie);
    CHECK(m.entry->class_id == 0);

    SemanticReconstructionDictionary empty;
    CHECK_THROWS_AS(static_cast<void>(match_cluster({0.0, 0.0}, empty)), std::invalid_argument);
}

TEST_CASE("match_cluster is invariant under permutation of storage order") {
    const Fixture& f = fixture();
    SemanticReconstructionDictionary reversed;
    reversed.latent_dim = f.phi.latent_dim;
    reversed.entries.assign(f.phi.entries.rbegin(), f.phi.entries.rend());
    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        LatentVector r(NetworkParams::kLatentDim);
        for (double& v : r) v = rng.normal(0.0, 2.0);
        const ClusterMatch a = match_cluster(r, f.phi);
        const ClusterMatch b = match_cluster(r, reversed);
        CHECK(a.entry->class_id == b.entry->class_id);
        CHECK(a.entry->cluster_index == b.entry->cluster_index);
        CHECK(a.md == b.md);
    }
}

TEST_CASE("purifying a constant image returns it unchanged") {
    const Fixture& f = fixture();
    Tensor t(16, 16, 1);
    std::fill(t.data.begin(), t.data.end(), 0.42);
    const Image x = Image::checked(std::move(t));
    PurifyConfig cfg;
    cfg.admm.max_iters = 100;
    const auto [pur, trace] = purify(x, f.baseline.params, f.phi, cfg);
    for (std::size_t i = 0; i < pur.tensor().data.size(); ++i)
        CHECK(std::abs(pur.tensor().data[i] - 0.42) < 1e-12);
}

TEST_CASE("purify is bit-deterministic") {
    const Fixture& f = fixture();
    PurifyConfig cfg;
    cfg.admm.max_iters = 60;
    const auto [a, ta] = purify(f.eval.images[0], f.baseline.params, f.phi, cfg);
    const auto [b, tb] = purify(f.eval.images[0], f.baseline.params, f.phi, cfg);
    CHECK(a.tensor().data == b.tensor().data);
    CHECK(ta.matched_class == tb.matched_class);
    CHECK(ta.md == tb.md);
}

TEST_CASE("purify records the matched entry and solver diagnostics") {
    const Fixture& f = fixture();
    PurifyConfig cfg;
    cfg.admm.max_iters = 120;
    const auto [pur, trace] = purify(f.eval.images[3], f.baseline.params, f.phi, cfg);
    CHECK(trace.matched_class >= 0);
    CHECK(trace.md >= 0.0);
    CHECK(trace.cbpdn_iterations >= 1);
}

TEST_CASE("evaluate degenerates to plain accuracy with no attack and no purifier") {
    const Fixture& f = fixture();
    const EvaluationReport report = evaluate(f.baseline.params, f.eval, {}, nullptr);
    REQUIRE(report.conditions.size() == 1);
    CHECK(report.conditions[0].name == "clean");

    std::size_t correct = 0;
    for (std::size_t i = 0; i < f.eval.size(); ++i) {
        const ForwardResult fr = forward(f.baseline.params, f.eval.images[i].tensor());
        const int pred = static_cast<int>(std::max_element(fr.logits.begin(), fr.logits.end()) -
                                          fr.logits.begin());
        if (pred == f.eval.labels[i]) ++correct;
    }
    CHECK(report.conditions[0].accuracy ==
          doctest::Approx(static_cast<double>(correct) / f.eval.size()));
}

TEST_CASE("a zero-epsilon attack matches clean accuracy and the grid has the right rows") {
    const Fixture& f = fixture();
    AttackConfig zero;
    zero.method = AttackMethod::Fgsm;
    zero.norm = AttackNorm::L2;
    zero.epsilon = 0.0;
    AttackConfig fgsm_cfg = zero;
    fgsm_cfg.epsilon = 0.04;

    const EvaluationReport report = evaluate(f.baseline.params, f.eval, {zero, fgsm_cfg}, nullptr);
    REQUIRE(report.conditions.size() == 3);  // clean + 2 attacked rows
    CHECK(report.conditions[1].accuracy == doctest::Approx(report.conditions[0].accuracy));
    CHECK_NOTHROW(report.validate_consistency());
}

TEST_CASE("report files are written and reproducible") {
    const Fixture& f = fixture();
    AttackConfig fgsm_cfg;
    fgsm_cfg.epsilon = 0.04;
    const EvaluationReport report = evaluate(f.baseline.params, f.eval, {fgsm_cfg}, nullptr);

    const fs::path dir_a = temp_dir("report_a");
    const fs::path dir_b = temp_dir("report_b");
    write_report_files(report, dir_a);
    write_report_files(report, dir_b);
    CHECK(read_all(dir_a / "report.txt") == read_all(dir_b / "report.txt"));
    CHECK(read_all(dir_a / "records.jsonl") == read_all(dir_b / "records.jsonl"));

    const std::string table = render_report_table(report);
    CHECK(table.find("clean") != std::string::npos);
    CHECK(table.find("a0_fgsm_l2_eps0.04") != std::string::npos);
}

TEST_CASE("cluster lookup covers every sample and feeds train_robust") {
    const Fixture& f = fixture();
    const auto lookup = make_cluster_lookup(f.phi, f.train.size());
    for (const auto* d : lookup) CHECK(d != nullptr);

    RobustTrainConfig rc;
    rc.base.epochs = 1;
    rc.base.seed = 60;
    rc.alpha = 0.2;
    rc.inner_attack.method = AttackMethod::Pgd;
    rc.inner_attack.norm = AttackNorm::L2;
    rc.inner_attack.epsilon = 0.1;
    rc.inner_attack.steps = 2;
    const TrainResult r = train_robust(f.train, f.phi, rc);
    CHECK(r.epochs.size() == 1);
    CHECK(r.epochs[0].mean_md >= 0.0);
}

}  // TEST_SUITE
