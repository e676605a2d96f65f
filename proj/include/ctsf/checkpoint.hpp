#pragma once

#include <filesystem>
#include <memory>
#include <optional>

#include "ctsf/data.hpp"
#include "ctsf/trainable.hpp"

namespace ctsf {

inline constexpr int kCheckpointVersion = 1;

/// A restored model plus the normalizer it was trained with, if saved.
struct LoadedCheckpoint {
  std::unique_ptr<TrainableModel> model;
  std::optional<Normalizer> normalizer;
};

/// Plain-text checkpoint.
///
///   ctsf-checkpoint 1 key=value ...           (model header, fixed order)
///   <tensor name> <extents joined by 'x'> <values, 17 significant digits>
///   ...
///   normalizer.minimum <n> <values>           (optional)
///   normalizer.maximum <n> <values>
///
/// Values round-trip bit-exactly.
void save_checkpoint(const TrainableModel& model, const std::optional<Normalizer>& normalizer,
                     const std::filesystem::path& path);

/// Throws DataError on a malformed or inconsistent file.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ctsf
