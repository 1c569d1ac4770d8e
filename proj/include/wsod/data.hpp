#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <unordered_map>
#include <utility>
#include <vector>

#include "wsod/errors.hpp"
#include "wsod/geometry.hpp"

namespace wsod {

/// A region proposal: the fixed feature vector produced by the (out-of-scope)
/// first stage, plus the box it was pooled from and the frame it lives in.
struct RegionFeature {
  Eigen::VectorXd vector;
  BoundingBox source_box;
  int frame_id = -1;
};

struct Scene {
  double width = 0.0;
  double height = 0.0;
};

/// One stream element: proposal regions with feature vectors. `gt` is the
/// ground truth; for unlabeled stream frames it is hidden state that only the
/// label oracle and harness diagnostics may read, never a selection policy.
struct Frame {
  int id = -1;
  int sequence_pos = 0;
  Scene scene;
  std::vector<RegionFeature> regions;
  std::vector<Annotation> gt;
};

/// Mean of a frame's region feature vectors; the image-level descriptor used
/// by pool-based diversity sampling. Zero vector for a frame with no regions.
inline Eigen::VectorXd frame_mean_feature(const Frame& frame, int feature_dim) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(feature_dim);
  if (frame.regions.empty()) return mean;
  for (const RegionFeature& r : frame.regions) {
    if (r.vector.size() != feature_dim) {
      throw InvalidInput("frame_mean_feature: feature dimension mismatch");
    }
    mean += r.vector;
  }
  return mean / static_cast<double>(frame.regions.size());
}

/// Fully annotated frames. Grows only by appending (active-learning answers
/// during the weakly-supervised phase); existing annotations are never edited.
struct LabeledSet {
  std::vector<Frame> frames;

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }
  void append(Frame frame) { frames.push_back(std::move(frame)); }
};

/// Ordered unlabeled frames consumed exactly once. The cursor cannot rewind;
/// a second consume() call is a contract violation. Copying produces a fresh,
/// unconsumed stream over the same frames.
class UnlabeledStream {
 public:
  UnlabeledStream() = default;
  explicit UnlabeledStream(std::vector<Frame> frames) : frames_(std::move(frames)) {}

  UnlabeledStream(const UnlabeledStream& other) : frames_(other.frames_) {}
  UnlabeledStream& operator=(const UnlabeledStream& other) {
    frames_ = other.frames_;
    consumed_ = false;
    return *this;
  }
  UnlabeledStream(UnlabeledStream&&) = default;
  UnlabeledStream& operator=(UnlabeledStream&&) = default;

  std::size_t size() const { return frames_.size(); }
  bool consumed() const { return consumed_; }

  /// Forward-only cursor over the stream.
  class Cursor {
   public:
    /// Next frame, or nullptr at end of stream.
    const Frame* next() {
      if (pos_ >= frames_->size()) return nullptr;
      return &(*frames_)[pos_++];
    }

   private:
    friend class UnlabeledStream;
    explicit Cursor(const std::vector<Frame>* frames) : frames_(frames) {}
    const std::vector<Frame>* frames_;
    std::size_t pos_ = 0;
  };

  /// Single-consumption entry point. Throws ContractViolation on reuse.
  Cursor consume() {
    if (consumed_) {
      throw ContractViolation("UnlabeledStream: stream already consumed (one pass only)");
    }
    consumed_ = true;
    return Cursor(&frames_);
  }

  /// Frame storage; stays valid after consumption so recorded per-frame
  /// pointers from the single pass remain usable. Not a second pass.
  const std::vector<Frame>& frames() const { return frames_; }

 private:
  std::vector<Frame> frames_;
  bool consumed_ = false;
};

/// Answers annotation queries; the stand-in for the human teacher. Answers
/// must be consistent across repeated queries of the same frame.
class LabelOracle {
 public:
  virtual ~LabelOracle() = default;
  virtual std::vector<Annotation> answer(int frame_id) const = 0;
};

/// Oracle backed by a frame_id -> annotations table (the harness's hidden
/// ground truth, or annotations loaded from a dataset file).
class TableOracle : public LabelOracle {
 public:
  TableOracle() = default;
  explicit TableOracle(std::unordered_map<int, std::vector<Annotation>> table)
      : table_(std::move(table)) {}

  static TableOracle from_frames(const std::vector<Frame>& frames) {
    std::unordered_map<int, std::vector<Annotation>> table;
    for (const Frame& f : frames) table[f.id] = f.gt;
    return TableOracle(std::move(table));
  }

  std::vector<Annotation> answer(int frame_id) const override {
    auto it = table_.find(frame_id);
    if (it == table_.end()) {
      throw InvalidInput("TableOracle: unknown frame id " + std::to_string(frame_id));
    }
    return it->second;
  }

 private:
  std::unordered_map<int, std::vector<Annotation>> table_;
};

}  // namespace wsod
