#include "purikit/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "purikit/parallel.hpp"
#include "purikit/rng.hpp"

namespace purikit {

void SrdConfig::validate() const {
    if (psi_max < 2) throw std::invalid_argument("srd: psi_max must be at least 2");
    if (atom_count < 1) throw std::invalid_argument("srd: atom_count must be positive");
    if (filter_size < 1) throw std::invalid_argument("srd: filter_size must be positive");
    if (!(lambda_l1 >= 0.0)) throw std::invalid_argument("srd: lambda_l1 must be nonnegative");
    if (cdl_outer_iters < 1) throw std::invalid_argument("srd: cdl_outer_iters must be positive");
    admm.validate();
}

void SemanticReconstructionDictionary::validate_partition(std::size_t dataset_size) const {
    std::vector<int> seen(dataset_size, 0);
    for (const auto& e : entries)
        for (std::int64_t id : e.member_ids) {
            if (id < 0 || static_cast<std::size_t>(id) >= dataset_size)
                throw std::logic_error("srd: member id out of range");
            ++seen[static_cast<std::size_t>(id)];
        }
    for (std::size_t i = 0; i < dataset_size; ++i)
        if (seen[i] != 1)
            throw std::logic_error("srd: sample " + std::to_string(i) + " appears in " +
                                   std::to_string(seen[i]) + " entries");
}

namespace {

double center_dist_sq(const LatentVector& a, const LatentVector& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

struct RawCluster {
    LatentVector center;
    std::vector<std::size_t> members;  // positions within the class
};

// Merges clusters with fewer than 2 members into the nearest sibling by
// center distance, renumbering afterwards.
void merge_small_clusters(std::vector<RawCluster>& clusters, int class_id,
                          std::vector<std::string>& diagnostics) {
    bool merged = true;
    while (merged && clusters.size() > 1) {
        merged = false;
        for (std::size_t i = 0; i < clusters.size(); ++i) {
            if (clusters[i].members.size() >= 2) continue;
            std::size_t nearest = i == 0 ? 1 : 0;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < clusters.size(); ++j) {
                if (j == i) continue;
                const double d = center_dist_sq(clusters[i].center, clusters[j].center);
                if (d < best) {
                    best = d;
                    nearest = j;
                }
            }
            diagnostics.push_back("class " + std::to_string(class_id) + ": merged a cluster of " +
                                  std::to_string(clusters[i].members.size()) +
                                  " member(s) into its nearest sibling");
            auto& dst = clusters[nearest];
            dst.members.insert(dst.members.end(), clusters[i].members.begin(),
                               clusters[i].members.end());
            clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(i));
            merged = true;
            break;
        }
    }
}

}  // namespace

SemanticReconstructionDictionary build_srd(const NetworkParams& baseline,
                                           const LabeledDataset& train, const SrdConfig& cfg) {
    cfg.validate();
    train.validate();
    if (train.images.empty()) throw std::invalid_argument("build_srd: empty training set");

    SemanticReconstructionDictionary phi;
    phi.latent_dim = NetworkParams::kLatentDim;
    phi.seed = cfg.seed;
    phi.wcss_curves.resize(train.class_count);

    // All latents in one parallel pass.
    std::vector<LatentVector> latents(train.size());
    parallel_for(train.size(), [&](std::size_t i) {
        latents[i] = forward(baseline, train.images[i].tensor()).latent;
    });

    for (int c = 0; c < train.class_count; ++c) {
        std::vector<std::int64_t> class_ids;
        std::vector<LatentVector> class_latents;
        for (std::size_t i = 0; i < train.size(); ++i) {
            if (train.labels[i] != c) continue;
            class_ids.push_back(static_cast<std::int64_t>(i));
            class_latents.push_back(latents[i]);
        }
        if (class_latents.size() < 2)
            throw std::invalid_argument("build_srd: class " + std::to_string(c) +
                                        " has fewer than 2 samples");

        const auto selection =
            select_cluster_count(class_latents, cfg.psi_max, derive_seed(cfg.seed, 0xE1B0, c));
        phi.wcss_curves[c] = selection.wcss_curve;
        for (const auto& warning : selection.warnings)
            phi.diagnostics.push_back("class " + std::to_string(c) + ": " + warning);

        // Best of 3 seeded restarts at the selected count.
        KmeansResult best;
        double best_wcss = std::numeric_limits<double>::infinity();
        for (int t = 0; t < 3; ++t) {
            KmeansResult run =
                kmeans(class_latents, selection.psi_star, derive_seed(cfg.seed, 0xF17, c, t));
            if (run.wcss < best_wcss) {
                best_wcss = run.wcss;
                best = std::move(run);
            }
        }

        std::vector<RawCluster> clusters(selection.psi_star);
        for (int k = 0; k < selection.psi_star; ++k) clusters[k].center = best.centers[k];
        for (std::size_t i = 0; i < class_latents.size(); ++i)
            clusters[best.assignments[i]].members.push_back(i);
        merge_small_clusters(clusters, c, phi.diagnostics);
        if (clusters.size() == 1 && clusters[0].members.size() < 2)
            throw std::invalid_argument("build_srd: class " + std::to_string(c) +
                                        " cannot form a cluster with 2 members");

        for (std::size_t k = 0; k < clusters.size(); ++k) {
            SrdEntry entry;
            entry.class_id = c;
            entry.cluster_index = static_cast<int>(k);
            std::vector<LatentVector> member_latents;
            std::vector<Tensor> member_images;
            for (std::size_t pos : clusters[k].members) {
                entry.member_ids.push_back(class_ids[pos]);
                member_latents.push_back(class_latents[pos]);
                // Atoms are coded against the high band at purification
                // time, so they are learned on that band as well.
                auto [low, high] =
                    tikhonov_decompose(train.images[static_cast<std::size_t>(class_ids[pos])],
                                       cfg.tikhonov);
                member_images.push_back(std::move(high));
            }
            std::sort(entry.member_ids.begin(), entry.member_ids.end());
            entry.distribution = fit_distribution(member_latents);
            entry.dictionary =
                learn_dictionary(member_images, cfg.atom_count, cfg.filter_size, cfg.lambda_l1,
                                 cfg.admm, derive_seed(cfg.seed, 0xD1C7, c, k), cfg.cdl_outer_iters);
            phi.entries.push_back(std::move(entry));
        }
    }

    phi.validate_partition(train.size());
    return phi;
}

ClusterMatch match_cluster(const LatentVector& r, const SemanticReconstructionDictionary& phi) {
    if (phi.entries.empty()) throw std::invalid_argument("match_cluster: empty dictionary");
    ClusterMatch best;
    for (const auto& entry : phi.entries) {
        const double md = mahalanobis(r, entry.distribution);
        const bool better =
            !best.entry || md < best.md ||
            (md == best.md && std::pair(entry.class_id, entry.cluster_index) <
                                  std::pair(best.entry->class_id, best.entry->cluster_index));
        if (better) {
            best.entry = &entry;
            best.md = md;
        }
    }
    return best;
}

std::vector<const ClusterDistribution*> make_cluster_lookup(
    const SemanticReconstructionDictionary& phi, std::size_t dataset_size) {
    std::vector<const ClusterDistribution*> lookup(dataset_size, nullptr);
    for (const auto& entry : phi.entries)
        for (std::int64_t id : entry.member_ids) {
            if (id < 0 || static_cast<std::size_t>(id) >= dataset_size)
                throw std::invalid_argument("cluster lookup: member id out of range");
            lookup[static_cast<std::size_t>(id)] = &entry.distribution;
        }
    return lookup;
}

TrainResult train_robust(const LabeledDataset& dataset,
                         const SemanticReconstructionDictionary& phi, const RobustTrainConfig& cfg) {
    return train_robust(dataset, make_cluster_lookup(phi, dataset.size()), cfg);
}

std::pair<Image, PurifyTrace> purify(const Image& x, const NetworkParams& robust_params,
                                     const SemanticReconstructionDictionary& phi,
                                     const PurifyConfig& cfg) {
    const LatentVector latent = forward(robust_params, x.tensor()).latent;
    const ClusterMatch match = match_cluster(latent, phi);

    auto [low, high] = tikhonov_decompose(x, cfg.tikhonov);
    auto [maps, diag] = cbpdn(match.entry->dictionary, high, cfg.lambda_l1, cfg.admm);
    const Tensor recon = reconstruct(match.entry->dictionary, maps);

    Tensor purified = low;
    for (std::size_t i = 0; i < purified.data.size(); ++i) purified.data[i] += recon.data[i];

    PurifyTrace trace;
    trace.matched_class = match.entry->class_id;
    trace.matched_cluster = match.entry->cluster_index;
    trace.md = match.md;
    trace.cbpdn_converged = diag.converged;
    trace.cbpdn_iterations = diag.iterations;
    trace.cbpdn_objective = diag.final_objective;
    return {clamp_to_image(std::move(purified)), trace};
}

void EvaluationReport::validate_consistency() const {
    for (const auto& cond : conditions) {
        std::size_t correct = 0, total = 0;
        for (const auto& rec : records) {
            if (rec.condition != cond.name) continue;
            ++total;
            if (rec.correct) ++correct;
        }
        if (total != cond.total || correct != cond.correct)
            throw std::logic_error("report: condition '" + cond.name +
                                   "' disagrees with its sample records");
        const double acc = total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
        if (std::abs(acc - cond.accuracy) > 1e-12)
            throw std::logic_error("report: accuracy mismatch for '" + cond.name + "'");
    }
}

std::string attack_condition_name(std::size_t index, const AttackConfig& cfg) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "a%zu_%s_%s_eps%.6g", index, attack_method_name(cfg.method),
                  attack_norm_name(cfg.norm), cfg.epsilon);
    return buf;
}

namespace {

struct Condition {
    std::string name;
    std::optional<AttackConfig> attack;
    int attack_index = -1;
    bool purified = false;
};

}  // namespace

EvaluationReport evaluate(const NetworkParams& classifier_params, const LabeledDataset& dataset,
                          const std::vector<AttackConfig>& attacks, const Purifier* purifier) {
    dataset.validate();
    for (const auto& a : attacks) a.validate();

    std::vector<Condition> grid;
    grid.push_back({"clean", std::nullopt, -1, false});
    if (purifier) grid.push_back({"clean_purified", std::nullopt, -1, true});
    for (std::size_t i = 0; i < attacks.size(); ++i) {
        grid.push_back({attack_condition_name(i, attacks[i]), attacks[i], static_cast<int>(i), false});
        if (purifier)
            grid.push_back({attack_condition_name(i, attacks[i]) + "_purified", attacks[i],
                            static_cast<int>(i), true});
    }

    EvaluationReport report;
    const InputGradFn grad = input_grad_fn(classifier_params);

    // Attacked variants are shared between the plain and purified cells of
    // each row, so craft them once per attack config.
    std::vector<std::vector<Image>> attacked(attacks.size());
    for (std::size_t a = 0; a < attacks.size(); ++a) {
        attacked[a].resize(dataset.size());
        parallel_for(dataset.size(), [&](std::size_t i) {
            AttackConfig per_sample = attacks[a];
            per_sample.seed = derive_seed(attacks[a].seed, 0xA77, i);
            attacked[a][i] = run_attack(grad, dataset.images[i], dataset.labels[i], per_sample);
        });
    }

    for (const auto& cond : grid) {
        const auto t0 = std::chrono::steady_clock::now();
        const std::vector<Image>* source =
            cond.attack_index >= 0 ? &attacked[cond.attack_index] : &dataset.images;

        std::vector<SampleRecord> recs(dataset.size());
        parallel_for(dataset.size(), [&](std::size_t i) {
            SampleRecord rec;
            rec.condition = cond.name;
            rec.index = static_cast<std::int64_t>(i);
            rec.label = dataset.labels[i];
            const Image* input = &(*source)[i];
            Image purified_img;
            if (cond.purified) {
                auto [img, trace] = purify(*input, *purifier->robust_params, *purifier->phi,
                                           purifier->cfg);
                purified_img = std::move(img);
                input = &purified_img;
                rec.purified = true;
                rec.matched_class = trace.matched_class;
                rec.matched_cluster = trace.matched_cluster;
                rec.md = trace.md;
            }
            const ForwardResult fwd = forward(classifier_params, input->tensor());
            rec.prediction = static_cast<int>(
                std::max_element(fwd.logits.begin(), fwd.logits.end()) - fwd.logits.begin());
            rec.correct = rec.prediction == rec.label;
            recs[i] = std::move(rec);
        });

        ConditionResult result;
        result.name = cond.name;
        result.attack = cond.attack;
        result.purified = cond.purified;
        result.total = recs.size();
        for (const auto& r : recs)
            if (r.correct) ++result.correct;
        result.accuracy =
            result.total == 0 ? 0.0 : static_cast<double>(result.correct) / static_cast<double>(result.total);
        result.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.conditions.push_back(result);
        report.records.insert(report.records.end(), std::make_move_iterator(recs.begin()),
                              std::make_move_iterator(recs.end()));
    }

    report.validate_consistency();
    return report;
}

std::string render_report_table(const EvaluationReport& report) {
    std::size_t name_width = 9;
    for (const auto& c : report.conditions) name_width = std::max(name_width, c.name.size());

    std::string out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-*s  %8s  %13s\n", static_cast<int>(name_width), "condition",
                  "accuracy", "correct/total");
    out += line;
    out += std::string(name_width + 25, '-') + "\n";
    for (const auto& c : report.conditions) {
        std::snprintf(line, sizeof(line), "%-*s  %8.4f  %6zu/%-6zu\n", static_cast<int>(name_width),
                      c.name.c_str(), c.accuracy, c.correct, c.total);
        out += line;
    }
    return out;
}

void write_report_files(const EvaluationReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream txt(dir / "report.txt", std::ios::trunc);
        if (!txt) throw std::runtime_error("report: cannot write " + (dir / "report.txt").string());
        txt << render_report_table(report);
    }
    {
        std::ofstream jsonl(dir / "records.jsonl", std::ios::trunc);
        if (!jsonl) throw std::runtime_error("report: cannot write " + (dir / "records.jsonl").string());
        for (const auto& rec : report.records) {
            nlohmann::json j = {{"condition", rec.condition}, {"index", rec.index},
                                {"label", rec.label},         {"prediction", rec.prediction},
                                {"correct", rec.correct}};
            if (rec.purified) {
                j["matched_class"] = rec.matched_class;
                j["matched_cluster"] = rec.matched_cluster;
                j["md"] = rec.md;
            }
            jsonl << j.dump() << "\n";
        }
    }
}

}  // namespace purikit
