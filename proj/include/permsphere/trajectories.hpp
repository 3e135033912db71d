#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "permsphere/permutation.hpp"
#include "permsphere/rng.hpp"

namespace permsphere {

/// Planar positions of a fixed set of objects over contiguous frames
/// 0..frames-1; frames[t][k] is the position of object k at frame t.
struct TrackDataset {
  int objects = 0;
  std::vector<std::vector<Eigen::Vector2d>> frames;

  int frame_count() const { return static_cast<int>(frames.size()); }
};

/// Proximity swap model: at each frame, a pair at squared distance d2 swaps
/// identities with probability p_swap * exp(-d2 / (2 s^2)).
struct SwapModelParams {
  double p_swap = 0.1;
  double scale = 0.1;

  void validate() const {
    if (!(p_swap >= 0.0 && p_swap <= 1.0))
      throw std::invalid_argument("SwapModelParams: p_swap must be in [0, 1]");
    if (!(scale > 0.0))
      throw std::invalid_argument("SwapModelParams: scale must be > 0");
  }
};

inline double swap_probability(double distance, const SwapModelParams& params) {
  return params.p_swap *
         std::exp(-distance * distance / (2.0 * params.scale * params.scale));
}

namespace detail {

/// Uniform Catmull-Rom interpolation through waypoints, clamped at the ends.
inline Eigen::Vector2d catmull_rom(const std::vector<Eigen::Vector2d>& w,
                                   double u) {
  const int segs = static_cast<int>(w.size()) - 1;
  const double scaled = std::min(std::max(u, 0.0), 1.0) * segs;
  int seg = std::min(static_cast<int>(scaled), segs - 1);
  const double t = scaled - seg;
  const auto at = [&](int idx) {
    return w[static_cast<std::size_t>(std::clamp(idx, 0, segs))];
  };
  const Eigen::Vector2d p0 = at(seg - 1), p1 = at(seg), p2 = at(seg + 1),
                        p3 = at(seg + 2);
  const double t2 = t * t, t3 = t2 * t;
  return 0.5 * ((2.0 * p1) + (-p0 + p2) * t +
                (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2 +
                (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t3);
}

inline double min_pair_distance(const TrackDataset& data) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& frame : data.frames)
    for (std::size_t i = 0; i < frame.size(); ++i)
      for (std::size_t j = i + 1; j < frame.size(); ++j)
        best = std::min(best, (frame[i] - frame[j]).norm());
  return best;
}

}  // namespace detail

/// Smooth random paths in the unit square with frequent crossings: each
/// object follows a Catmull-Rom spline through uniformly random waypoints.
/// Regenerates (deterministically) until some pair approaches within 0.1,
/// which a handful of attempts always achieves for objects >= 2.
inline TrackDataset generate_trajectories(int objects, int frames,
                                          std::mt19937_64& rng) {
  if (objects < 2)
    throw std::invalid_argument("generate_trajectories: objects must be >= 2");
  if (frames < 2)
    throw std::invalid_argument("generate_trajectories: frames must be >= 2");

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int waypoints = std::max(3, frames / 40);

  for (int attempt = 0; attempt < 200; ++attempt) {
    std::vector<std::vector<Eigen::Vector2d>> paths(
        static_cast<std::size_t>(objects));
    for (auto& w : paths) {
      w.resize(static_cast<std::size_t>(waypoints) + 1);
      for (auto& p : w) p = Eigen::Vector2d(unif(rng), unif(rng));
    }
    TrackDataset data;
    data.objects = objects;
    data.frames.resize(static_cast<std::size_t>(frames));
    for (int t = 0; t < frames; ++t) {
      const double u = static_cast<double>(t) / (frames - 1);
      auto& frame = data.frames[static_cast<std::size_t>(t)];
      frame.resize(static_cast<std::size_t>(objects));
      for (int k = 0; k < objects; ++k)
        frame[static_cast<std::size_t>(k)] =
            detail::catmull_rom(paths[static_cast<std::size_t>(k)], u);
    }
    if (detail::min_pair_distance(data) < 0.1) return data;
  }
  throw std::runtime_error(
      "generate_trajectories: no close approach after 200 attempts");
}

/// Hidden identity permutation per frame. Starting from the identity, each
/// frame visits the unordered pairs (i, j), i < j, in lexicographic order and
/// swaps their identities with the proximity probability. The permutation
/// recorded at frame t reflects the swaps of frames 0..t.
inline std::vector<PermutationMatrix> apply_swap_model(
    const TrackDataset& data, const SwapModelParams& params,
    std::mt19937_64& rng) {
  params.validate();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<PermutationMatrix> hidden;
  hidden.reserve(data.frames.size());
  PermutationMatrix current = PermutationMatrix::identity(data.objects);
  for (const auto& frame : data.frames) {
    for (int i = 0; i < data.objects; ++i) {
      for (int j = i + 1; j < data.objects; ++j) {
        const double dist = (frame[static_cast<std::size_t>(i)] -
                             frame[static_cast<std::size_t>(j)])
                                .norm();
        if (unif(rng) < swap_probability(dist, params))
          current = current.with_tracks_swapped(i, j);
      }
    }
    hidden.push_back(current);
  }
  return hidden;
}

// --- CSV ingestion / export --------------------------------------------------
//
// Format: header "frame,object,x,y", one row per object per frame, frames
// contiguous from 0, every object present in every frame.

inline void export_trajectories(const std::filesystem::path& path,
                                const TrackDataset& data) {
  std::ofstream os(path, std::ios::trunc);
  if (!os)
    throw std::runtime_error("export_trajectories: cannot open: " + path.string());
  os << "frame,object,x,y\n";
  char buf[96];
  for (int t = 0; t < data.frame_count(); ++t)
    for (int k = 0; k < data.objects; ++k) {
      const Eigen::Vector2d& p =
          data.frames[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)];
      std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g\n", t, k, p.x(), p.y());
      os << buf;
    }
  if (!os) throw std::runtime_error("export_trajectories: write failed");
}

inline TrackDataset ingest_trajectories(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is)
    throw std::runtime_error("ingest_trajectories: cannot open: " + path.string());

  std::string line;
  int line_no = 0;
  if (!std::getline(is, line))
    throw std::runtime_error("ingest_trajectories: empty file: " + path.string());
  ++line_no;
  if (line == "frame,object,x,y\r") line.pop_back();
  if (line != "frame,object,x,y")
    throw std::runtime_error(
        "ingest_trajectories: line 1: expected header 'frame,object,x,y'");

  struct Row {
    int frame, object;
    double x, y;
  };
  std::vector<Row> rows;
  int max_frame = -1, max_object = -1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Row r{};
    std::istringstream ss(line);
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(ss >> r.frame >> c1 >> r.object >> c2 >> r.x >> c3 >> r.y) ||
        c1 != ',' || c2 != ',' || c3 != ',' || (ss >> std::ws, !ss.eof()))
      throw std::runtime_error("ingest_trajectories: line " +
                               std::to_string(line_no) + ": malformed row '" +
                               line + "'");
    if (r.frame < 0 || r.object < 0)
      throw std::runtime_error("ingest_trajectories: line " +
                               std::to_string(line_no) +
                               ": negative frame or object index");
    max_frame = std::max(max_frame, r.frame);
    max_object = std::max(max_object, r.object);
    rows.push_back(r);
  }
  if (rows.empty())
    throw std::runtime_error("ingest_trajectories: no data rows in " +
                             path.string());

  const int frames = max_frame + 1;
  const int objects = max_object + 1;
  TrackDataset data;
  data.objects = objects;
  data.frames.assign(static_cast<std::size_t>(frames),
                     std::vector<Eigen::Vector2d>(
                         static_cast<std::size_t>(objects),
                         Eigen::Vector2d(std::nan(""), std::nan(""))));
  for (const Row& r : rows) {
    auto& slot = data.frames[static_cast<std::size_t>(r.frame)]
                            [static_cast<std::size_t>(r.object)];
    if (!std::isnan(slot.x()))
      throw std::runtime_error("ingest_trajectories: duplicate row for frame " +
                               std::to_string(r.frame) + ", object " +
                               std::to_string(r.object));
    slot = Eigen::Vector2d(r.x, r.y);
  }
  for (int t = 0; t < frames; ++t)
    for (int k = 0; k < objects; ++k)
      if (std::isnan(data.frames[static_cast<std::size_t>(t)]
                                [static_cast<std::size_t>(k)]
                                    .x()))
        throw std::runtime_error("ingest_trajectories: frame " +
                                 std::to_string(t) + " is missing object " +
                                 std::to_string(k));
  return data;
}

}  // namespace permsphere
