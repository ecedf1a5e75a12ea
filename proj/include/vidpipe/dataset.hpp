#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vidpipe/core.hpp"

namespace vidpipe {

struct Dataset {
  std::vector<QAItem> items;
  std::map<std::string, VideoManifest> manifests;
};

/// JSON-lines QA file; SchemaError messages carry file:line and the field.
std::vector<QAItem> load_qa_file(const std::filesystem::path& path);

/// One manifest JSON per video in the directory. Frame sources are resolved
/// relative to the manifest's own directory.
VideoManifest load_manifest(const std::filesystem::path& path);
std::map<std::string, VideoManifest> load_manifest_dir(const std::filesystem::path& dir);

/// Loads and cross-validates: every item's video must exist (DanglingVideo)
/// and breakpoint indices must be inside the video (BadBreakpoint).
Dataset ingest_dataset(const std::filesystem::path& qa_file,
                       const std::filesystem::path& manifest_dir);

}  // namespace vidpipe
