#include "scusum/mocap.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "csv_util.hpp"
#include "scusum/error.hpp"

namespace scusum::mocap {

namespace {

std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::optional<long> parse_index(std::string_view s) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

std::size_t AmcClip::dimension() const {
  std::size_t d = 0;
  for (std::size_t c : channel_counts) d += c;
  return d;
}

bool operator==(const AmcClip& a, const AmcClip& b) {
  return a.header == b.header && a.bone_order == b.bone_order && a.channel_counts == b.channel_counts &&
         a.frames == b.frames && a.frame_indices == b.frame_indices;
}

AmcClip parse_amc(std::istream& in) {
  AmcClip clip;
  std::string raw;
  std::size_t line_no = 0;
  bool in_body = false;
  // Number of bones seen so far in the current frame.
  std::size_t bone_pos = 0;

  auto close_frame = [&](std::size_t at_line) {
    if (clip.frames.size() > 1 && bone_pos != clip.bone_order.size()) {
      throw BoneMismatchError("frame " + std::to_string(clip.frame_indices.back()) + " has " +
                                  std::to_string(bone_pos) + " bones, expected " +
                                  std::to_string(clip.bone_order.size()),
                              at_line);
    }
  };

  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = detail::trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (!in_body) clip.header.emplace_back(line);
      continue;
    }
    if (line.front() == ':') {
      if (in_body) throw ParseError("directive after first frame", line_no);
      clip.header.emplace_back(line);
      continue;
    }

    const auto toks = tokens(line);
    if (toks.size() == 1) {
      if (const auto index = parse_index(toks[0])) {
        if (in_body) {
          close_frame(line_no);
          const long expected = clip.frame_indices.back() + 1;
          if (*index != expected) {
            throw FrameSequenceError("frame index " + std::to_string(*index) + " follows " +
                                         std::to_string(clip.frame_indices.back()) + " (expected " +
                                         std::to_string(expected) + ")",
                                     line_no);
          }
        }
        in_body = true;
        clip.frame_indices.push_back(*index);
        clip.frames.emplace_back();
        bone_pos = 0;
        continue;
      }
    }
    if (!in_body) throw ParseError("expected a frame index before bone data", line_no);

    const std::string name(toks[0]);
    if (toks.size() < 2) throw ParseError("bone '" + name + "' has no channel values", line_no);
    std::vector<double> values;
    values.reserve(toks.size() - 1);
    for (std::size_t k = 1; k < toks.size(); ++k) {
      const auto v = detail::parse_double(toks[k]);
      if (!v) {
        throw ParseError("non-numeric value '" + std::string(toks[k]) + "' for bone '" + name + "'", line_no);
      }
      values.push_back(*v);
    }

    if (clip.frames.size() == 1) {
      for (const auto& seen : clip.bone_order) {
        if (seen == name) throw BoneMismatchError("bone '" + name + "' repeated within a frame", line_no);
      }
      clip.bone_order.push_back(name);
      clip.channel_counts.push_back(values.size());
    } else {
      if (bone_pos >= clip.bone_order.size()) {
        throw BoneMismatchError("unexpected extra bone '" + name + "' in frame " +
                                    std::to_string(clip.frame_indices.back()),
                                line_no);
      }
      if (clip.bone_order[bone_pos] != name) {
        throw BoneMismatchError("bone '" + name + "' where '" + clip.bone_order[bone_pos] + "' was expected",
                                line_no);
      }
      if (clip.channel_counts[bone_pos] != values.size()) {
        throw BoneMismatchError("bone '" + name + "' has " + std::to_string(values.size()) +
                                    " channels, expected " + std::to_string(clip.channel_counts[bone_pos]),
                                line_no);
      }
    }
    clip.frames.back().push_back(std::move(values));
    ++bone_pos;
  }
  if (in_body) close_frame(line_no + 1);
  return clip;
}

AmcClip parse_amc_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open AMC file " + path.string());
  try {
    return parse_amc(in);
  } catch (const FrameSequenceError& e) {
    throw FrameSequenceError(e.detail(), e.line(), path.string());
  } catch (const BoneMismatchError& e) {
    throw BoneMismatchError(e.detail(), e.line(), path.string());
  } catch (const ParseError& e) {
    throw ParseError(e.detail(), e.line(), path.string());
  }
}

void write_amc(std::ostream& out, const AmcClip& clip) {
  for (const auto& h : clip.header) out << h << '\n';
  for (std::size_t f = 0; f < clip.frames.size(); ++f) {
    out << clip.frame_indices[f] << '\n';
    for (std::size_t b = 0; b < clip.frames[f].size(); ++b) {
      out << clip.bone_order[b];
      for (double v : clip.frames[f][b]) out << ' ' << detail::format_double(v);
      out << '\n';
    }
  }
}

std::vector<StateVector> clip_to_vectors(const AmcClip& clip, std::size_t stride) {
  if (stride == 0) throw UsageError("stride must be >= 1");
  if (clip.frames.empty()) throw UsageError("clip has no frames");
  const auto d = static_cast<Eigen::Index>(clip.dimension());
  std::vector<StateVector> out;
  out.reserve((clip.frames.size() + stride - 1) / stride);
  for (std::size_t f = 0; f < clip.frames.size(); f += stride) {
    StateVector v(d);
    Eigen::Index k = 0;
    for (const auto& group : clip.frames[f]) {
      for (double value : group) v[k++] = value;
    }
    out.push_back(std::move(v));
  }
  return out;
}

Scenario build_scenario(const ScenarioSpec& spec) {
  const std::vector<StateVector> pre = clip_to_vectors(spec.pre_clip, spec.stride);
  if (spec.splice_index == 0 || spec.splice_index > pre.size()) {
    throw UsageError("splice_index must lie in [1, " + std::to_string(pre.size()) + "]");
  }
  Scenario scenario;
  scenario.states.assign(pre.begin(), pre.begin() + static_cast<std::ptrdiff_t>(spec.splice_index));

  if (spec.post_clip && !spec.post_clip->frames.empty()) {
    if (spec.post_clip->dimension() != spec.pre_clip.dimension()) {
      throw DimensionError("post clip", spec.pre_clip.dimension(), spec.post_clip->dimension());
    }
    std::vector<StateVector> post = clip_to_vectors(*spec.post_clip, spec.stride);
    if (spec.post_length && *spec.post_length < post.size()) post.resize(*spec.post_length);
    if (!post.empty()) {
      scenario.change_index = spec.splice_index;
      scenario.states.insert(scenario.states.end(), post.begin(), post.end());
    }
  }

  if (spec.standardize) {
    const Standardization st = Standardization::fit(std::span(scenario.states).first(spec.splice_index));
    for (auto& v : scenario.states) v = st.apply(v);
    scenario.standardization = st;
  }
  scenario.pairs = make_pairs(scenario.states);
  return scenario;
}

void write_vectors_csv(std::ostream& out, const std::vector<StateVector>& vectors) {
  const Eigen::Index d = vectors.empty() ? 0 : vectors.front().size();
  for (Eigen::Index i = 0; i < d; ++i) out << (i ? "," : "") << 'c' << i;
  out << '\n';
  for (const auto& v : vectors) {
    for (Eigen::Index i = 0; i < d; ++i) out << (i ? "," : "") << detail::format_double(v[i]);
    out << '\n';
  }
}

}  // namespace scusum::mocap
