#include "vidpipe/dataset.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>

#include "vidpipe/json_io.hpp"
#include "vidpipe/util.hpp"

namespace vidpipe {

using nlohmann::json;

std::vector<QAItem> load_qa_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open QA file '" + path.string() + "'");
  }
  std::vector<QAItem> items;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = path.filename().string() + ":" + std::to_string(line_no);
    QAItem item;
    try {
      item = qa_item_from_json(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::SchemaError, where + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::SchemaError, where + ": " + e.what());
    }
    if (trim(item.id).empty()) {
      throw Error(ErrorCode::SchemaError, where + ": field 'id' is empty");
    }
    if (!seen_ids.insert(item.id).second) {
      throw Error(ErrorCode::SchemaError, where + ": duplicate id '" + item.id + "'");
    }
    if (trim(item.video_id).empty()) {
      throw Error(ErrorCode::SchemaError, where + ": field 'video_id' is empty");
    }
    if (trim(item.question).empty()) {
      throw Error(ErrorCode::SchemaError, where + ": field 'question' is empty");
    }
    if (item.mode == QAMode::Breakpoint && !item.breakpoint_index) {
      throw Error(ErrorCode::SchemaError,
                  where + ": breakpoint item '" + item.id + "' lacks 'breakpoint_index'");
    }
    if (item.mode == QAMode::Global && item.breakpoint_index) {
      throw Error(ErrorCode::SchemaError,
                  where + ": global item '" + item.id + "' carries 'breakpoint_index'");
    }
    items.push_back(std::move(item));
  }
  return items;
}

VideoManifest load_manifest(const std::filesystem::path& path) {
  const std::string where = path.filename().string();
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, where + ": " + e.what());
  }
  VideoManifest manifest;
  try {
    manifest.video_id = doc.at("video_id").get<std::string>();
    manifest.fps = doc.at("fps").get<double>();
    for (const auto& row : doc.at("frames")) {
      FrameRef frame;
      frame.video_id = manifest.video_id;
      frame.index = row.at("index").get<std::size_t>();
      frame.timestamp_s = row.at("timestamp_s").get<double>();
      frame.source = row.at("source").get<std::string>();
      std::filesystem::path source(frame.source);
      if (source.is_relative()) {
        frame.source = (path.parent_path() / source).string();
      }
      manifest.frames.push_back(std::move(frame));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, where + ": " + e.what());
  }
  if (manifest.fps <= 0) {
    throw Error(ErrorCode::SchemaError, where + ": fps must be positive");
  }
  if (manifest.frames.empty()) {
    throw Error(ErrorCode::SchemaError, where + ": no frames");
  }
  for (std::size_t i = 0; i < manifest.frames.size(); ++i) {
    if (manifest.frames[i].index != i) {
      throw Error(ErrorCode::SchemaError,
                  where + ": frame " + std::to_string(i) + " has index " +
                      std::to_string(manifest.frames[i].index) +
                      " (indices must be 0..n-1 in order)");
    }
    if (i > 0 && manifest.frames[i].timestamp_s < manifest.frames[i - 1].timestamp_s) {
      throw Error(ErrorCode::SchemaError,
                  where + ": timestamp_s decreases at frame " + std::to_string(i));
    }
  }
  return manifest;
}

std::map<std::string, VideoManifest> load_manifest_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::IoError, "manifest dir '" + dir.string() + "' does not exist");
  }
  std::map<std::string, VideoManifest> manifests;
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      paths.push_back(entry.path());
    }
  }
  std::sort(paths.begin(), paths.end());
  for (const auto& path : paths) {
    VideoManifest manifest = load_manifest(path);
    const std::string video_id = manifest.video_id;
    if (!manifests.emplace(video_id, std::move(manifest)).second) {
      throw Error(ErrorCode::SchemaError,
                  "duplicate manifest for video '" + video_id + "'");
    }
  }
  return manifests;
}

Dataset ingest_dataset(const std::filesystem::path& qa_file,
                       const std::filesystem::path& manifest_dir) {
  Dataset dataset;
  dataset.items = load_qa_file(qa_file);
  dataset.manifests = load_manifest_dir(manifest_dir);
  for (const auto& item : dataset.items) {
    auto it = dataset.manifests.find(item.video_id);
    if (it == dataset.manifests.end()) {
      throw Error(ErrorCode::DanglingVideo,
                  "item '" + item.id + "' references unknown video '" + item.video_id + "'");
    }
    if (item.mode == QAMode::Breakpoint &&
        *item.breakpoint_index >= it->second.frame_count()) {
      throw Error(ErrorCode::BadBreakpoint,
                  "item '" + item.id + "' breakpoint " +
                      std::to_string(*item.breakpoint_index) + " >= frame count " +
                      std::to_string(it->second.frame_count()));
    }
  }
  return dataset;
}

}  // namespace vidpipe
