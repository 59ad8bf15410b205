#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "scusum/core.hpp"
#include "scusum/scorenet.hpp"

namespace scusum::mocap {

/// One CMU AMC clip. Frame k holds one value group per bone, in `bone_order`.
struct AmcClip {
  std::vector<std::string> header;  // comment and ':' directive lines, verbatim
  std::vector<std::string> bone_order;
  std::vector<std::size_t> channel_counts;
  std::vector<std::vector<std::vector<double>>> frames;
  std::vector<long> frame_indices;

  std::size_t dimension() const;
  std::size_t frame_count() const noexcept { return frames.size(); }
};

bool operator==(const AmcClip& a, const AmcClip& b);

/// Parses AMC text. Header lines start with '#' or ':'; the body alternates a
/// bare frame-index line with `bone v1 v2 ...` lines.
///
/// Throws ParseError for non-numeric values, FrameSequenceError when indices
/// do not increase by exactly one, BoneMismatchError when a frame's bones or
/// channel counts differ from the first frame's. Every error carries a line number.
AmcClip parse_amc(std::istream& in);
AmcClip parse_amc_file(const std::filesystem::path& path);

/// Writes AMC text that parse_amc reads back to the same clip.
void write_amc(std::ostream& out, const AmcClip& clip);

/// Concatenated channels per frame, keeping frames 0, stride, 2*stride, ...
std::vector<StateVector> clip_to_vectors(const AmcClip& clip, std::size_t stride = 1);

struct ScenarioSpec {
  AmcClip pre_clip;
  std::optional<AmcClip> post_clip;
  /// Number of pre-clip vectors kept; the post segment starts at this index.
  std::size_t splice_index = 0;
  std::size_t stride = 1;
  bool standardize = true;
  /// Cap on post-segment vectors (whole post clip when unset).
  std::optional<std::size_t> post_length;
};

struct Scenario {
  std::vector<StateVector> states;
  std::vector<TransitionPair> pairs;
  /// Index of the first post-change state; nullopt without a post segment.
  std::optional<std::size_t> change_index;
  std::optional<Standardization> standardization;
};

/// Splices the pre segment and post segment into one stream, optionally
/// z-scoring every state with statistics of the pre segment.
Scenario build_scenario(const ScenarioSpec& spec);

/// Frame-per-row CSV (header c0..c{d-1}).
void write_vectors_csv(std::ostream& out, const std::vector<StateVector>& vectors);

}  // namespace scusum::mocap
