#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "purikit/attack.hpp"
#include "purikit/cluster.hpp"
#include "purikit/net.hpp"
#include "purikit/signal.hpp"
#include "purikit/sparse.hpp"
#include "purikit/tensor.hpp"

namespace purikit {

// One cluster's worth of the semantic reconstruction dictionary: the atoms
// learned from the cluster's originating images, the latent Gaussian, and
// the global dataset indices of its members.
struct SrdEntry {
    int class_id = 0;
    int cluster_index = 0;
    Dictionary dictionary;
    ClusterDistribution distribution;
    std::vector<std::int64_t> member_ids;
};

struct SemanticReconstructionDictionary {
    std::vector<SrdEntry> entries;
    int latent_dim = 0;
    std::vector<std::vector<double>> wcss_curves;  // one curve per class
    std::vector<std::string> diagnostics;          // merges and lowered psi_max
    std::uint64_t seed = 0;

    // Every training sample appears in exactly one entry's member_ids.
    void validate_partition(std::size_t dataset_size) const;
};

struct SrdConfig {
    int psi_max = 4;
    int atom_count = 16;
    int filter_size = 5;
    double lambda_l1 = 0.05;
    // Frequency split applied to member images before dictionary learning;
    // must match the split used at purification time, since the atoms are
    // coded against the high band there.
    TikhonovConfig tikhonov;
    AdmmConfig admm;
    int cdl_outer_iters = 15;
    std::uint64_t seed = 0;

    void validate() const;
};

// Stage (i) after baseline training: per class, extract latents, pick the
// cluster count by the elbow rule, cluster, fit Gaussians, and learn one
// dictionary per cluster from the high-frequency band of that cluster's
// member images. Clusters with fewer than 2 members merge into their
// nearest sibling (by center distance) with a diagnostic.
SemanticReconstructionDictionary build_srd(const NetworkParams& baseline,
                                           const LabeledDataset& train, const SrdConfig& cfg);

struct ClusterMatch {
    const SrdEntry* entry = nullptr;
    double md = 0.0;
};

// The cluster across all classes minimizing the Mahalanobis distance; ties
// break by (class_id, cluster_index) ascending, independent of storage
// order.
ClusterMatch match_cluster(const LatentVector& r, const SemanticReconstructionDictionary& phi);

// dataset index -> cluster distribution, from the member associations.
std::vector<const ClusterDistribution*> make_cluster_lookup(
    const SemanticReconstructionDictionary& phi, std::size_t dataset_size);

// Convenience wrapper feeding the recorded associations into the trainer.
TrainResult train_robust(const LabeledDataset& dataset,
                         const SemanticReconstructionDictionary& phi, const RobustTrainConfig& cfg);

struct PurifyConfig {
    TikhonovConfig tikhonov;   // frequency split
    double lambda_l1 = 0.05;   // CBPDN sparsity weight
    AdmmConfig admm;
};

struct PurifyTrace {
    int matched_class = -1;
    int matched_cluster = -1;
    double md = 0.0;
    bool cbpdn_converged = false;
    int cbpdn_iterations = 0;
    double cbpdn_objective = 0.0;
};

// Inference-time purification: match the robust latent against all clusters
// of Phi, split the input with the Tikhonov filter, reconstruct the
// high-frequency band by sparse coding on the matched dictionary, and add
// the bands back, clamped to [0,1]. CBPDN non-convergence is flagged in the
// trace; purification never aborts.
std::pair<Image, PurifyTrace> purify(const Image& x, const NetworkParams& robust_params,
                                     const SemanticReconstructionDictionary& phi,
                                     const PurifyConfig& cfg);

struct Purifier {
    const NetworkParams* robust_params = nullptr;
    const SemanticReconstructionDictionary* phi = nullptr;
    PurifyConfig cfg;
};

struct SampleRecord {
    std::string condition;
    std::int64_t index = 0;
    int label = 0;
    int prediction = 0;
    bool correct = false;
    bool purified = false;
    int matched_class = -1;
    int matched_cluster = -1;
    double md = 0.0;
};

struct ConditionResult {
    std::string name;
    std::optional<AttackConfig> attack;
    bool purified = false;
    double accuracy = 0.0;
    std::size_t correct = 0;
    std::size_t total = 0;
    double wall_seconds = 0.0;  // never persisted; reports must be reproducible
};

struct EvaluationReport {
    std::vector<ConditionResult> conditions;
    std::vector<SampleRecord> records;

    // Recomputes every condition accuracy from the sample records and
    // throws on disagreement.
    void validate_consistency() const;
};

// Accuracy over the {attack on/off} x {purify on/off} grid. Attacks are
// crafted against classifier_params (the attacker never sees the
// transformation), and purified images are classified by that same model;
// the robust model inside the purifier only drives cluster matching.
EvaluationReport evaluate(const NetworkParams& classifier_params, const LabeledDataset& dataset,
                          const std::vector<AttackConfig>& attacks, const Purifier* purifier);

std::string attack_condition_name(std::size_t index, const AttackConfig& cfg);
std::string render_report_table(const EvaluationReport& report);
// Writes report.txt and records.jsonl; both byte-reproducible under a
// fixed seed (wall times stay out of the files).
void write_report_files(const EvaluationReport& report, const std::filesystem::path& dir);

}  // namespace purikit
