#pragma once

#include <fstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>
#include <zlib.h>

#include "wsod/data.hpp"
#include "wsod/errors.hpp"

namespace wsod {

inline constexpr int kDatasetSchemaVersion = 1;

struct DatasetMeta {
  int num_classes = 0;
  int feature_dim = 0;
  double scene_width = 0.0;
  double scene_height = 0.0;
  std::string name;
};

struct Dataset {
  DatasetMeta meta;
  std::vector<Frame> frames;
};

namespace detail {

inline bool gz_path(const std::string& path) {
  return path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
}

/// Line-oriented writer over either a plain or a gzip file.
class LineWriter {
 public:
  explicit LineWriter(const std::string& path) : path_(path), gzip_(gz_path(path)) {
    if (gzip_) {
      gz_ = gzopen(path.c_str(), "wb");
      if (gz_ == nullptr) throw IoError("dataset: cannot open " + path);
    } else {
      out_.open(path);
      if (!out_) throw IoError("dataset: cannot open " + path);
    }
  }
  ~LineWriter() {
    if (gz_ != nullptr) gzclose(gz_);
  }
  LineWriter(const LineWriter&) = delete;
  LineWriter& operator=(const LineWriter&) = delete;

  void line(const std::string& text) {
    if (gzip_) {
      if (gzwrite(gz_, text.data(), static_cast<unsigned>(text.size())) !=
              static_cast<int>(text.size()) ||
          gzwrite(gz_, "\n", 1) != 1) {
        throw IoError("dataset: gzip write failed for " + path_);
      }
    } else {
      out_ << text << '\n';
      if (!out_) throw IoError("dataset: write failed for " + path_);
    }
  }

 private:
  std::string path_;
  bool gzip_;
  gzFile gz_ = nullptr;
  std::ofstream out_;
};

/// Line-oriented reader over either a plain or a gzip file.
class LineReader {
 public:
  explicit LineReader(const std::string& path) : path_(path), gzip_(gz_path(path)) {
    if (gzip_) {
      gz_ = gzopen(path.c_str(), "rb");
      if (gz_ == nullptr) throw IoError("dataset: cannot open " + path);
    } else {
      in_.open(path);
      if (!in_) throw IoError("dataset: cannot open " + path);
    }
  }
  ~LineReader() {
    if (gz_ != nullptr) gzclose(gz_);
  }
  LineReader(const LineReader&) = delete;
  LineReader& operator=(const LineReader&) = delete;

  bool line(std::string& out) {
    if (!gzip_) return static_cast<bool>(std::getline(in_, out));
    out.clear();
    char buf[4096];
    while (true) {
      if (gzgets(gz_, buf, sizeof(buf)) == nullptr) return !out.empty();
      out += buf;
      if (!out.empty() && out.back() == '\n') {
        out.pop_back();
        return true;
      }
    }
  }

 private:
  std::string path_;
  bool gzip_;
  gzFile gz_ = nullptr;
  std::ifstream in_;
};

inline nlohmann::json box_to_json(const BoundingBox& b) {
  return nlohmann::json::array({b.x_min, b.y_min, b.x_max, b.y_max});
}

inline BoundingBox box_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) throw IoError("dataset: box must be [x0,y0,x1,y1]");
  return BoundingBox{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(),
                     j.at(3).get<double>()};
}

}  // namespace detail

/// Write frames as JSON Lines: one versioned header record, then one record
/// per frame. A path ending in .gz writes gzip. include_gt = false withholds
/// annotations (exporting a stream as an unlabeled consumer would see it).
inline void save_dataset(const std::string& path, std::span<const Frame> frames,
                         const DatasetMeta& meta, bool include_gt = true) {
  detail::LineWriter out(path);
  nlohmann::json header{{"type", "header"},
                        {"schema_version", kDatasetSchemaVersion},
                        {"num_classes", meta.num_classes},
                        {"feature_dim", meta.feature_dim},
                        {"scene_width", meta.scene_width},
                        {"scene_height", meta.scene_height},
                        {"name", meta.name}};
  out.line(header.dump());
  for (const Frame& frame : frames) {
    nlohmann::json regions = nlohmann::json::array();
    for (const RegionFeature& r : frame.regions) {
      if (r.vector.size() != meta.feature_dim) {
        throw InvalidInput("dataset: region feature dim does not match header");
      }
      nlohmann::json feature = nlohmann::json::array();
      for (Eigen::Index i = 0; i < r.vector.size(); ++i) feature.push_back(r.vector(i));
      regions.push_back(
          nlohmann::json{{"box", detail::box_to_json(r.source_box)}, {"feature", feature}});
    }
    nlohmann::json gt = nlohmann::json::array();
    if (include_gt) {
      for (const Annotation& a : frame.gt) {
        gt.push_back(
            nlohmann::json{{"box", detail::box_to_json(a.box)}, {"class_id", a.class_id}});
      }
    }
    nlohmann::json record{{"type", "frame"},
                          {"id", frame.id},
                          {"sequence_pos", frame.sequence_pos},
                          {"regions", std::move(regions)},
                          {"gt", std::move(gt)}};
    out.line(record.dump());
  }
}

inline Dataset load_dataset(const std::string& path) {
  detail::LineReader in(path);
  std::string line;
  if (!in.line(line)) throw IoError("dataset: empty file " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("dataset: invalid header json: " + std::string(e.what()));
  }
  if (header.value("type", std::string{}) != "header") {
    throw IoError("dataset: first record must be the header");
  }
  if (header.at("schema_version").get<int>() != kDatasetSchemaVersion) {
    throw IoError("dataset: unsupported schema_version");
  }

  Dataset ds;
  ds.meta.num_classes = header.at("num_classes").get<int>();
  ds.meta.feature_dim = header.at("feature_dim").get<int>();
  ds.meta.scene_width = header.at("scene_width").get<double>();
  ds.meta.scene_height = header.at("scene_height").get<double>();
  ds.meta.name = header.value("name", std::string{});

  int pos = 0;
  while (in.line(line)) {
    if (line.empty()) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError("dataset: invalid frame json: " + std::string(e.what()));
    }
    if (record.value("type", std::string{}) != "frame") {
      throw IoError("dataset: unexpected record type");
    }
    Frame frame;
    frame.id = record.at("id").get<int>();
    frame.sequence_pos = record.value("sequence_pos", pos);
    frame.scene = Scene{ds.meta.scene_width, ds.meta.scene_height};
    for (const auto& rj : record.at("regions")) {
      RegionFeature region;
      region.source_box = detail::box_from_json(rj.at("box"));
      const auto& fj = rj.at("feature");
      if (static_cast<int>(fj.size()) != ds.meta.feature_dim) {
        throw IoError("dataset: feature dim does not match header");
      }
      region.vector.resize(ds.meta.feature_dim);
      for (int i = 0; i < ds.meta.feature_dim; ++i) {
        region.vector(i) = fj.at(static_cast<std::size_t>(i)).get<double>();
      }
      region.frame_id = frame.id;
      frame.regions.push_back(std::move(region));
    }
    for (const auto& aj : record.at("gt")) {
      const int class_id = aj.at("class_id").get<int>();
      if (class_id < 0 || class_id >= ds.meta.num_classes) {
        throw IoError("dataset: class id out of range");
      }
      frame.gt.push_back(Annotation{detail::box_from_json(aj.at("box")), class_id});
    }
    ds.frames.push_back(std::move(frame));
    ++pos;
  }
  return ds;
}

}  // namespace wsod
