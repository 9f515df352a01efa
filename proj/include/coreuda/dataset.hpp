#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "coreuda/image.hpp"

namespace coreuda {

enum class Split { train, gallery, query };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

struct ImageRecord {
  std::string image_id;
  Image pixels;
  std::optional<int> identity;
  int camera_id = 0;
  Split split = Split::train;
  std::optional<int> style_source_camera;  // set only on style-transferred copies
  bool is_flipped = false;
};

struct DatasetSummary {
  int num_cameras = 0;
  int ids_train = 0;
  int images_train = 0;
  int ids_gallery = 0;
  int images_gallery = 0;
  int ids_query = 0;
  int images_query = 0;

  bool operator==(const DatasetSummary&) const = default;
};

// Exact counts over the records. When `expected` is given, any field mismatch
// raises SummaryMismatch naming the offending field.
DatasetSummary summarize_and_validate(const std::vector<ImageRecord>& records,
                                      const std::optional<DatasetSummary>& expected = std::nullopt);

// Remaps identities to dense 0..M-1 in first-seen order over the given records.
// Records without identity are left untouched.
int remap_identities_dense(std::vector<ImageRecord>& records);

// Manifest format, one line per image:
// image_id<TAB>relative_path<TAB>identity|-<TAB>camera_id<TAB>split<TAB>style_source_camera|-
void write_manifest(const std::filesystem::path& manifest_path,
                    const std::vector<ImageRecord>& records,
                    const std::filesystem::path& image_dir);

std::vector<ImageRecord> load_manifest(const std::filesystem::path& manifest_path,
                                       bool load_pixels = true);

}  // namespace coreuda
