#include "coreuda/dataset.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "coreuda/errors.hpp"

namespace coreuda {

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::gallery: return "gallery";
    case Split::query: return "query";
  }
  return "train";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "gallery") return Split::gallery;
  if (name == "query") return Split::query;
  throw CorruptFile("unknown split name: " + name);
}

DatasetSummary summarize_and_validate(const std::vector<ImageRecord>& records,
                                      const std::optional<DatasetSummary>& expected) {
  if (records.empty()) throw EmptyDataset("summarize_and_validate: no records");
  std::set<int> cameras;
  std::set<int> ids_train, ids_gallery, ids_query;
  DatasetSummary s;
  for (const auto& r : records) {
    cameras.insert(r.camera_id);
    switch (r.split) {
      case Split::train:
        if (!r.identity) throw MissingIdentity("train record without identity: " + r.image_id);
        ids_train.insert(*r.identity);
        s.images_train++;
        break;
      case Split::gallery:
        if (r.identity) ids_gallery.insert(*r.identity);
        s.images_gallery++;
        break;
      case Split::query:
        if (r.identity) ids_query.insert(*r.identity);
        s.images_query++;
        break;
    }
  }
  s.num_cameras = static_cast<int>(cameras.size());
  s.ids_train = static_cast<int>(ids_train.size());
  s.ids_gallery = static_cast<int>(ids_gallery.size());
  s.ids_query = static_cast<int>(ids_query.size());

  if (expected) {
    auto check = [](const char* field, int got, int want) {
      if (got != want)
        throw SummaryMismatch(std::string("summary mismatch on ") + field + ": got " +
                              std::to_string(got) + ", want " + std::to_string(want));
    };
    check("num_cameras", s.num_cameras, expected->num_cameras);
    check("ids_train", s.ids_train, expected->ids_train);
    check("images_train", s.images_train, expected->images_train);
    check("ids_gallery", s.ids_gallery, expected->ids_gallery);
    check("images_gallery", s.images_gallery, expected->images_gallery);
    check("ids_query", s.ids_query, expected->ids_query);
    check("images_query", s.images_query, expected->images_query);
  }
  return s;
}

int remap_identities_dense(std::vector<ImageRecord>& records) {
  std::map<int, int> remap;
  for (auto& r : records) {
    if (!r.identity) continue;
    auto [it, inserted] = remap.try_emplace(*r.identity, static_cast<int>(remap.size()));
    r.identity = it->second;
  }
  return static_cast<int>(remap.size());
}

void write_manifest(const std::filesystem::path& manifest_path,
                    const std::vector<ImageRecord>& records,
                    const std::filesystem::path& image_dir) {
  std::filesystem::create_directories(image_dir);
  std::ofstream f(manifest_path);
  if (!f) throw CorruptFile("write_manifest: cannot open " + manifest_path.string());
  const auto base = manifest_path.parent_path();
  for (const auto& r : records) {
    std::string rel = std::filesystem::relative(image_dir / (r.image_id + ".ppm"), base).generic_string();
    write_ppm(image_dir / (r.image_id + ".ppm"), r.pixels);
    f << r.image_id << '\t' << rel << '\t'
      << (r.identity ? std::to_string(*r.identity) : "-") << '\t' << r.camera_id << '\t'
      << split_name(r.split) << '\t'
      << (r.style_source_camera ? std::to_string(*r.style_source_camera) : "-") << '\n';
  }
}

std::vector<ImageRecord> load_manifest(const std::filesystem::path& manifest_path,
                                       bool load_pixels) {
  std::ifstream f(manifest_path);
  if (!f) throw CorruptFile("load_manifest: cannot open " + manifest_path.string());
  const auto base = manifest_path.parent_path();
  std::vector<ImageRecord> records;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id, rel, ident, cam, split, style;
    if (!std::getline(ls, id, '\t') || !std::getline(ls, rel, '\t') ||
        !std::getline(ls, ident, '\t') || !std::getline(ls, cam, '\t') ||
        !std::getline(ls, split, '\t') || !std::getline(ls, style, '\t'))
      throw CorruptFile("load_manifest: malformed line: " + line);
    ImageRecord r;
    r.image_id = id;
    if (ident != "-") r.identity = std::stoi(ident);
    r.camera_id = std::stoi(cam);
    r.split = split_from_name(split);
    if (style != "-") r.style_source_camera = std::stoi(style);
    if (load_pixels) r.pixels = read_ppm(base / rel);
    records.push_back(std::move(r));
  }
  if (records.empty()) throw EmptyDataset("load_manifest: empty manifest " + manifest_path.string());
  return records;
}

}  // namespace coreuda
