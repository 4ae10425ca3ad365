#pragma once

#include "purikit/bundle.hpp"
#include "purikit/net.hpp"
#include "purikit/pipeline.hpp"
#include "purikit/tensor.hpp"

namespace purikit {

// Bundle encodings of the pipeline artifacts. Each carries a "kind" tag in
// the manifest and loaders reject the wrong kind, so stage commands fail
// loudly when handed a mismatched file.

ArtifactBundle dataset_to_bundle(const LabeledDataset& dataset);
LabeledDataset dataset_from_bundle(const ArtifactBundle& bundle);

ArtifactBundle params_to_bundle(const NetworkParams& params);
NetworkParams params_from_bundle(const ArtifactBundle& bundle);

ArtifactBundle srd_to_bundle(const SemanticReconstructionDictionary& phi);
SemanticReconstructionDictionary srd_from_bundle(const ArtifactBundle& bundle);

}  // namespace purikit
