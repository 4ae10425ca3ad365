#include "purikit/artifacts.hpp"

#include <stdexcept>

namespace purikit {

namespace {

void expect_kind(const ArtifactBundle& bundle, const char* kind) {
    if (!bundle.manifest().contains("kind") || bundle.manifest()["kind"] != kind)
        throw std::runtime_error(std::string("artifact: expected a '") + kind + "' bundle");
}

Matrix matrix_from(const std::vector<double>& flat, int n) {
    Matrix m(n, n);
    m.a = flat;
    return m;
}

}  // namespace

ArtifactBundle dataset_to_bundle(const LabeledDataset& dataset) {
    dataset.validate();
    if (dataset.images.empty()) throw std::invalid_argument("dataset bundle: empty dataset");
    const int h = dataset.images[0].height();
    const int w = dataset.images[0].width();
    const int c = dataset.images[0].channels();

    std::vector<double> pixels;
    pixels.reserve(dataset.size() * static_cast<std::size_t>(h) * w * c);
    std::vector<std::int64_t> labels;
    labels.reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const Tensor& t = dataset.images[i].tensor();
        if (t.height != h || t.width != w || t.channels != c)
            throw std::invalid_argument("dataset bundle: images must share one shape");
        pixels.insert(pixels.end(), t.data.begin(), t.data.end());
        labels.push_back(dataset.labels[i]);
    }

    ArtifactBundle bundle;
    bundle.manifest() = {{"kind", "dataset"},
                         {"class_count", dataset.class_count},
                         {"count", dataset.size()},
                         {"height", h},
                         {"width", w},
                         {"channels", c}};
    bundle.put_f64("images",
                   {dataset.size(), static_cast<std::uint64_t>(h), static_cast<std::uint64_t>(w),
                    static_cast<std::uint64_t>(c)},
                   std::move(pixels));
    bundle.put_i64("labels", {dataset.size()}, std::move(labels));
    return bundle;
}

LabeledDataset dataset_from_bundle(const ArtifactBundle& bundle) {
    expect_kind(bundle, "dataset");
    const auto& shape = bundle.shape("images");
    if (shape.size() != 4) throw std::runtime_error("dataset bundle: images array must be rank 4");
    const std::size_t n = shape[0];
    const int h = static_cast<int>(shape[1]);
    const int w = static_cast<int>(shape[2]);
    const int c = static_cast<int>(shape[3]);
    const auto& pixels = bundle.f64("images");
    const auto& labels = bundle.i64("labels");
    if (labels.size() != n) throw std::runtime_error("dataset bundle: label count mismatch");

    LabeledDataset out;
    out.class_count = bundle.manifest().at("class_count").get<int>();
    const std::size_t stride = static_cast<std::size_t>(h) * w * c;
    for (std::size_t i = 0; i < n; ++i) {
        Tensor t(h, w, c);
        std::copy(pixels.begin() + static_cast<std::ptrdiff_t>(i * stride),
                  pixels.begin() + static_cast<std::ptrdiff_t>((i + 1) * stride), t.data.begin());
        out.images.push_back(Image::checked(std::move(t)));
        out.labels.push_back(static_cast<int>(labels[i]));
    }
    out.validate();
    return out;
}

ArtifactBundle params_to_bundle(const NetworkParams& params) {
    ArtifactBundle bundle;
    bundle.manifest() = {{"kind", "network_params"},
                         {"in_channels", params.in_channels},
                         {"class_count", params.class_count},
                         {"latent_dim", NetworkParams::kLatentDim}};
    const auto k = static_cast<std::uint64_t>(NetworkParams::kKernel);
    bundle.put_f64("conv1_w",
                   {NetworkParams::kConv1Out, static_cast<std::uint64_t>(params.in_channels), k, k},
                   params.conv1_w);
    bundle.put_f64("conv1_b", {NetworkParams::kConv1Out}, params.conv1_b);
    bundle.put_f64("conv2_w", {NetworkParams::kConv2Out, NetworkParams::kConv1Out, k, k},
                   params.conv2_w);
    bundle.put_f64("conv2_b", {NetworkParams::kConv2Out}, params.conv2_b);
    bundle.put_f64("fc_w",
                   {static_cast<std::uint64_t>(params.class_count), NetworkParams::kLatentDim},
                   params.fc_w);
    bundle.put_f64("fc_b", {static_cast<std::uint64_t>(params.class_count)}, params.fc_b);
    return bundle;
}

NetworkParams params_from_bundle(const ArtifactBundle& bundle) {
    expect_kind(bundle, "network_params");
    NetworkParams p = NetworkParams::zeros(bundle.manifest().at("in_channels").get<int>(),
                                           bundle.manifest().at("class_count").get<int>());
    auto load = [&](const char* name, std::vector<double>& dst) {
        const auto& src = bundle.f64(name);
        if (src.size() != dst.size())
            throw std::runtime_error(std::string("params bundle: array '") + name +
                                     "' has the wrong size");
        dst = src;
    };
    load("conv1_w", p.conv1_w);
    load("conv1_b", p.conv1_b);
    load("conv2_w", p.conv2_w);
    load("conv2_b", p.conv2_b);
    load("fc_w", p.fc_w);
    load("fc_b", p.fc_b);
    return p;
}

ArtifactBundle srd_to_bundle(const SemanticReconstructionDictionary& phi) {
    ArtifactBundle bundle;
    nlohmann::json entries = nlohmann::json::array();
    for (std::size_t i = 0; i < phi.entries.size(); ++i) {
        const SrdEntry& e = phi.entries[i];
        entries.push_back({{"class_id", e.class_id},
                           {"cluster_index", e.cluster_index},
                           {"member_count", e.member_ids.size()},
                           {"pseudo_inverse", e.distribution.pseudo_flag},
                           {"atom_count", e.dictionary.atom_count},
                           {"filter_size", e.dictionary.filter_size},
                           {"channels", e.dictionary.channels}});

        const std::string prefix = "e" + std::to_string(i) + "_";
        const int m = e.dictionary.atom_count;
        const int f = e.dictionary.filter_size;
        const int c = e.dictionary.channels;
        std::vector<double> atoms;
        atoms.reserve(static_cast<std::size_t>(m) * f * f * c);
        for (const auto& atom : e.dictionary.atoms)
            atoms.insert(atoms.end(), atom.data.begin(), atom.data.end());
        bundle.put_f64(prefix + "atoms",
                       {static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(f),
                        static_cast<std::uint64_t>(f), static_cast<std::uint64_t>(c)},
                       std::move(atoms));
        const auto k = static_cast<std::uint64_t>(e.distribution.mean.size());
        bundle.put_f64(prefix + "mean", {k}, e.distribution.mean);
        bundle.put_f64(prefix + "cov", {k, k}, e.distribution.covariance.a);
        bundle.put_f64(prefix + "inv", {k, k}, e.distribution.inverse.a);
        bundle.put_i64(prefix + "members", {e.member_ids.size()}, e.member_ids);
    }
    bundle.manifest() = {{"kind", "srd"},
                         {"latent_dim", phi.latent_dim},
                         {"entries", std::move(entries)},
                         {"wcss_curves", phi.wcss_curves},
                         {"diagnostics", phi.diagnostics},
                         {"seed", phi.seed}};
    return bundle;
}

SemanticReconstructionDictionary srd_from_bundle(const ArtifactBundle& bundle) {
    expect_kind(bundle, "srd");
    SemanticReconstructionDictionary phi;
    phi.latent_dim = bundle.manifest().at("latent_dim").get<int>();
    phi.seed = bundle.manifest().at("seed").get<std::uint64_t>();
    phi.wcss_curves = bundle.manifest().at("wcss_curves").get<std::vector<std::vector<double>>>();
    phi.diagnostics = bundle.manifest().at("diagnostics").get<std::vector<std::string>>();

    const auto& entries = bundle.manifest().at("entries");
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& meta = entries[i];
        const std::string prefix = "e" + std::to_string(i) + "_";
        SrdEntry e;
        e.class_id = meta.at("class_id").get<int>();
        e.cluster_index = meta.at("cluster_index").get<int>();

        e.dictionary.atom_count = meta.at("atom_count").get<int>();
        e.dictionary.filter_size = meta.at("filter_size").get<int>();
        e.dictionary.channels = meta.at("channels").get<int>();
        const auto& atoms = bundle.f64(prefix + "atoms");
        const std::size_t stride = static_cast<std::size_t>(e.dictionary.filter_size) *
                                   e.dictionary.filter_size * e.dictionary.channels;
        for (int m = 0; m < e.dictionary.atom_count; ++m) {
            Tensor atom(e.dictionary.filter_size, e.dictionary.filter_size, e.dictionary.channels);
            std::copy(atoms.begin() + static_cast<std::ptrdiff_t>(m * stride),
                      atoms.begin() + static_cast<std::ptrdiff_t>((m + 1) * stride),
                      atom.data.begin());
            e.dictionary.atoms.push_back(std::move(atom));
        }
        e.dictionary.validate();

        e.distribution.mean = bundle.f64(prefix + "mean");
        const int k = static_cast<int>(e.distribution.mean.size());
        e.distribution.covariance = matrix_from(bundle.f64(prefix + "cov"), k);
        e.distribution.inverse = matrix_from(bundle.f64(prefix + "inv"), k);
        e.distribution.pseudo_flag = meta.at("pseudo_inverse").get<bool>();
        e.member_ids = bundle.i64(prefix + "members");
        phi.entries.push_back(std::move(e));
    }
    return phi;
}

}  // namespace purikit
