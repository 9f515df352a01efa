#pragma once

#include <stdexcept>
#include <string>

namespace coreuda {

// Base class for every error the library raises on contract violations.
class CoreudaError : public std::runtime_error {
 public:
  explicit CoreudaError(const std::string& msg) : std::runtime_error(msg) {}
};

#define COREUDA_DEFINE_ERROR(NAME)                                    \
  class NAME : public CoreudaError {                                  \
   public:                                                            \
    explicit NAME(const std::string& msg) : CoreudaError(msg) {}      \
  }

// datamodel
COREUDA_DEFINE_ERROR(EmptyDataset);
COREUDA_DEFINE_ERROR(MissingIdentity);
COREUDA_DEFINE_ERROR(SummaryMismatch);

// preprocess
COREUDA_DEFINE_ERROR(BadShape);

// camstyle
COREUDA_DEFINE_ERROR(EmptyBatch);
COREUDA_DEFINE_ERROR(DiscriminatorRange);
COREUDA_DEFINE_ERROR(UnknownCamera);

// network
COREUDA_DEFINE_ERROR(ShapeMismatch);
COREUDA_DEFINE_ERROR(NonFiniteActivation);
COREUDA_DEFINE_ERROR(OddHeight);

// attention / fusion
COREUDA_DEFINE_ERROR(ChannelMismatch);
COREUDA_DEFINE_ERROR(IndivisibleChannels);
COREUDA_DEFINE_ERROR(ZeroMeanFeature);

// mean teacher / checkpoints
COREUDA_DEFINE_ERROR(StageMismatch);
COREUDA_DEFINE_ERROR(CorruptFile);
COREUDA_DEFINE_ERROR(VersionMismatch);

// clustering
COREUDA_DEFINE_ERROR(TooFewPoints);
COREUDA_DEFINE_ERROR(NonFiniteInput);
COREUDA_DEFINE_ERROR(EmptyTargetSet);

// losses
COREUDA_DEFINE_ERROR(LabelOutOfRange);
COREUDA_DEFINE_ERROR(DegenerateBatch);

// evaluation
COREUDA_DEFINE_ERROR(NoRelevant);
COREUDA_DEFINE_ERROR(EmptyGallery);
COREUDA_DEFINE_ERROR(DimensionMismatch);

// configuration
COREUDA_DEFINE_ERROR(ConfigError);

#undef COREUDA_DEFINE_ERROR

}  // namespace coreuda
