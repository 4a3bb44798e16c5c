#pragma once

// Dashed-contour connectivity task: scenes contain several random-walk
// contours rendered as dashes plus two circular markers; the label says
// whether the markers sit on the ends of the same contour. Includes a
// renderer to 8-bit pixel grids, row-major pixel-sequence conversion, and a
// little-endian binary record format with a JSON sidecar.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <queue>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "arena/core/error.hpp"
#include "arena/core/rng.hpp"

namespace arena::tasks {

struct PixelSequence {
  std::vector<int> tokens;  // intensities 0-255, row-major
  int height = 0;
  int width = 0;
};

// Row-major flattening; invertible given (height, width).
inline PixelSequence image_to_sequence(const std::vector<std::uint8_t>& grid, int height, int width) {
  if (static_cast<std::size_t>(height) * width != grid.size())
    throw ShapeError("image_to_sequence: grid size " + std::to_string(grid.size()) + " != " +
                     std::to_string(height) + "x" + std::to_string(width));
  PixelSequence s;
  s.height = height;
  s.width = width;
  s.tokens.reserve(grid.size());
  for (std::uint8_t b : grid) s.tokens.push_back(b);
  return s;
}

inline std::vector<std::uint8_t> sequence_to_image(const PixelSequence& s) {
  if (static_cast<std::size_t>(s.height) * s.width != s.tokens.size())
    throw ShapeError("sequence_to_image: inconsistent token count");
  std::vector<std::uint8_t> grid(s.tokens.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    int v = s.tokens[i];
    if (v < 0 || v > 255) throw ParamError("sequence_to_image: intensity out of 0-255");
    grid[i] = static_cast<std::uint8_t>(v);
  }
  return grid;
}

struct Dash {
  float x0, y0, x1, y1;  // segment endpoints in pixel coordinates
  int contour = 0;
};

struct Marker {
  float x, y;
  int contour = 0;  // which contour's end it sits on
};

struct PathfinderScene {
  int size = 32;
  std::vector<Dash> dashes;
  Marker a, b;
  int label = 0;  // 1 = markers on the same contour
  std::vector<std::uint8_t> grid;  // size*size, intensities {0, 255}
};

struct PathfinderParams {
  int size = 32;
  int distractors = 2;  // contours beyond the one carrying marker a
  float dash_len = 3.0f;
  float gap = 2.0f;
  float marker_radius = 1.0f;
  int walk_steps = 8;       // dashes per contour
  float step_turn = 0.7f;   // max heading change per dash, radians
};

// The large variant is the small one with path length and marker radius
// scaled by the image-size ratio; dash geometry is unchanged.
inline PathfinderParams pathfinder_params(int size, int distractors = 2) {
  if (size != 32 && size != 128) throw ParamError("pathfinder: size must be 32 or 128");
  if (distractors < 1) throw ParamError("pathfinder: distractors must be >= 1");
  PathfinderParams p;
  p.size = size;
  p.distractors = distractors;
  if (size == 128) {
    p.walk_steps = 32;
    p.marker_radius = 4.0f;
  }
  return p;
}

namespace detail {

inline float sq(float v) { return v * v; }

// Connectivity over the construction's dashes: two dashes are adjacent when
// any pair of their endpoints is within the inter-dash gap (plus rounding
// slack), regardless of contour; a marker reaches a dash whose endpoint lies
// under its disc. This is the ground-truth graph the labels must agree with.
inline bool dashes_connected(const std::vector<Dash>& dashes, const Marker& a, const Marker& b,
                             float dash_tol, float marker_tol) {
  if (dashes.empty()) return false;
  std::size_t n = dashes.size();
  auto endpoint_within = [&](const Dash& d, float x, float y, float tol) {
    return sq(d.x0 - x) + sq(d.y0 - y) <= sq(tol) || sq(d.x1 - x) + sq(d.y1 - y) <= sq(tol);
  };
  auto endpoint_near = [&](const Dash& d, float x, float y) {
    return endpoint_within(d, x, y, dash_tol);
  };
  std::vector<char> start(n, 0), goal(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    start[i] = endpoint_within(dashes[i], a.x, a.y, marker_tol);
    goal[i] = endpoint_within(dashes[i], b.x, b.y, marker_tol);
  }
  std::vector<char> seen(n, 0);
  std::queue<std::size_t> q;
  for (std::size_t i = 0; i < n; ++i)
    if (start[i]) {
      seen[i] = 1;
      q.push(i);
    }
  while (!q.empty()) {
    std::size_t i = q.front();
    q.pop();
    if (goal[i]) return true;
    for (std::size_t j = 0; j < n; ++j) {
      if (seen[j]) continue;
      bool adj = endpoint_near(dashes[j], dashes[i].x0, dashes[i].y0) ||
                 endpoint_near(dashes[j], dashes[i].x1, dashes[i].y1);
      if (adj) {
        seen[j] = 1;
        q.push(j);
      }
    }
  }
  return false;
}

// Separation every point of a new contour must keep from every endpoint of
// previously placed contours. Strictly larger than both BFS tolerances, so
// distinct contours are never adjacent in the ground-truth graph and the
// negative label is consistent by construction.
inline float contour_separation(const PathfinderParams& p) {
  return p.gap + p.marker_radius + 1.0f;
}

// One random-walk contour of `steps` dashes with a gap between consecutive
// dashes; returns false if the walk leaves the canvas margin or comes too
// close to another contour.
inline bool walk_contour(Rng& rng, const PathfinderParams& p, int contour_id,
                         std::vector<Dash>& dashes, float& end_x, float& end_y,
                         float& start_x, float& start_y) {
  float margin = p.marker_radius + 1.0f;
  float sep = contour_separation(p);
  auto too_close = [&](float x, float y) {
    for (const Dash& d : dashes) {
      if (d.contour == contour_id) continue;
      if (sq(d.x0 - x) + sq(d.y0 - y) <= sq(sep) || sq(d.x1 - x) + sq(d.y1 - y) <= sq(sep))
        return true;
    }
    return false;
  };
  float x = static_cast<float>(rng.uniform(margin, p.size - margin));
  float y = static_cast<float>(rng.uniform(margin, p.size - margin));
  float heading = static_cast<float>(rng.uniform(0.0, 6.283185307));
  if (too_close(x, y)) return false;
  start_x = x;
  start_y = y;
  for (int s = 0; s < p.walk_steps; ++s) {
    // Steer: if the next dash (plus gap) would leave the canvas or crowd
    // another contour, resample the heading a few times before giving up.
    bool stepped = false;
    for (int t = 0; t < 12 && !stepped; ++t) {
      float h = heading + static_cast<float>(rng.uniform(-p.step_turn, p.step_turn)) +
                (t > 3 ? static_cast<float>(rng.uniform(0.0, 6.283185307)) : 0.0f);
      float nx = x + p.dash_len * std::cos(h);
      float ny = y + p.dash_len * std::sin(h);
      float gx = nx + p.gap * std::cos(h);
      float gy = ny + p.gap * std::sin(h);
      if (nx < margin || nx > p.size - margin || ny < margin || ny > p.size - margin) continue;
      if (gx < margin || gx > p.size - margin || gy < margin || gy > p.size - margin) continue;
      if (too_close(nx, ny) || too_close(gx, gy)) continue;
      dashes.push_back({x, y, nx, ny, contour_id});
      x = gx;
      y = gy;
      heading = h;
      stepped = true;
    }
    if (!stepped) return false;
  }
  end_x = x;
  end_y = y;
  return true;
}

inline void draw_disc(std::vector<std::uint8_t>& grid, int size, float cx, float cy, float r) {
  int x0 = std::max(0, static_cast<int>(cx - r - 1));
  int x1 = std::min(size - 1, static_cast<int>(cx + r + 1));
  int y0 = std::max(0, static_cast<int>(cy - r - 1));
  int y1 = std::min(size - 1, static_cast<int>(cy + r + 1));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (sq(x + 0.5f - cx) + sq(y + 0.5f - cy) <= sq(r + 0.5f))
        grid[static_cast<std::size_t>(y) * size + x] = 255;
}

inline void draw_segment(std::vector<std::uint8_t>& grid, int size, const Dash& d) {
  float len = std::sqrt(sq(d.x1 - d.x0) + sq(d.y1 - d.y0));
  int steps = std::max(1, static_cast<int>(len * 2.0f));
  for (int s = 0; s <= steps; ++s) {
    float t = static_cast<float>(s) / steps;
    int x = static_cast<int>(d.x0 + t * (d.x1 - d.x0));
    int y = static_cast<int>(d.y0 + t * (d.y1 - d.y0));
    if (x >= 0 && x < size && y >= 0 && y < size)
      grid[static_cast<std::size_t>(y) * size + x] = 255;
  }
}

}  // namespace detail

inline void render_scene(PathfinderScene& scene, const PathfinderParams& p) {
  scene.grid.assign(static_cast<std::size_t>(p.size) * p.size, 0);
  for (const Dash& d : scene.dashes) detail::draw_segment(scene.grid, p.size, d);
  detail::draw_disc(scene.grid, p.size, scene.a.x, scene.a.y, p.marker_radius);
  detail::draw_disc(scene.grid, p.size, scene.b.x, scene.b.y, p.marker_radius);
}

// One scene with the requested label. Positive samples put both markers on
// contour 0's ends; negatives put one marker on contour 0 and the other on a
// distractor. Construction-level connectivity is verified with a
// gap-tolerant breadth-first search over all dashes, so a negative whose
// contours happen to touch is rejected and redrawn.
inline PathfinderScene gen_pathfinder_scene(Rng& rng, const PathfinderParams& p, int label,
                                            int max_retries = 500) {
  float dash_tol = p.gap + 0.5f;
  float marker_tol = p.gap + p.marker_radius + 0.5f;
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    PathfinderScene scene;
    scene.size = p.size;
    scene.label = label;
    int n_contours = 1 + p.distractors;
    std::vector<float> sx(n_contours), sy(n_contours), ex(n_contours), ey(n_contours);
    bool ok = true;
    for (int c = 0; c < n_contours && ok; ++c) {
      // Random walks often run off the canvas; retry each contour in place
      // (rolling back its partial dashes) before giving up on the scene.
      bool placed = false;
      for (int t = 0; t < 40 && !placed; ++t) {
        std::size_t mark = scene.dashes.size();
        placed = detail::walk_contour(rng, p, c, scene.dashes, ex[c], ey[c], sx[c], sy[c]);
        if (!placed) scene.dashes.resize(mark);
      }
      ok = placed;
    }
    if (!ok) continue;
    scene.a = {sx[0], sy[0], 0};
    if (label == 1) {
      scene.b = {ex[0], ey[0], 0};
    } else {
      int other = 1 + static_cast<int>(rng.uniform_int(p.distractors));
      scene.b = {ex[other], ey[other], other};
    }
    if (detail::sq(scene.a.x - scene.b.x) + detail::sq(scene.a.y - scene.b.y) < detail::sq(2.0f))
      continue;  // marker centers must be >= 2 px apart
    bool connected = detail::dashes_connected(scene.dashes, scene.a, scene.b, dash_tol, marker_tol);
    if (connected != (label == 1)) continue;  // contours touched by accident
    render_scene(scene, p);
    return scene;
  }
  throw Error("gen_pathfinder: could not place a label-" + std::to_string(label) +
              " scene after " + std::to_string(max_retries) + " retries");
}

struct PixelSample {
  PixelSequence pixels;
  int label = 0;
};

// Labels are drawn 50/50; each sample uses its own split child stream so the
// output order is by index, independent of scheduling.
inline std::vector<PixelSample> gen_pathfinder(Rng& rng, int size, int n, int distractors = 2) {
  PathfinderParams p = pathfinder_params(size, distractors);
  std::vector<PixelSample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng child = rng.split();
    int label = child.bernoulli(0.5) ? 1 : 0;
    PathfinderScene scene = gen_pathfinder_scene(child, p, label);
    out.push_back({image_to_sequence(scene.grid, size, size), scene.label});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Binary pixel-record format: per record, little-endian u16 height, u16
// width, height*width intensity bytes, one label byte. A JSON sidecar at
// `<path>.json` records the generator parameters and seed.
// ---------------------------------------------------------------------------

namespace detail {
inline void put_u16le(std::ostream& f, std::uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  f.write(b, 2);
}
inline std::uint16_t get_u16le(std::istream& f) {
  unsigned char b[2];
  f.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}
}  // namespace detail

inline void write_pixel_records(const std::string& path, const std::vector<PixelSample>& samples,
                                const nlohmann::json& sidecar = {}) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("write_pixel_records: cannot open " + path);
  for (const auto& s : samples) {
    if (s.label < 0 || s.label > 255) throw ParamError("write_pixel_records: label out of byte range");
    detail::put_u16le(f, static_cast<std::uint16_t>(s.pixels.height));
    detail::put_u16le(f, static_cast<std::uint16_t>(s.pixels.width));
    std::vector<std::uint8_t> grid = sequence_to_image(s.pixels);
    f.write(reinterpret_cast<const char*>(grid.data()), static_cast<std::streamsize>(grid.size()));
    char lb = static_cast<char>(s.label);
    f.write(&lb, 1);
  }
  if (!sidecar.is_null() && !sidecar.empty()) {
    std::ofstream side(path + ".json", std::ios::binary);
    if (!side) throw IoError("write_pixel_records: cannot open " + path + ".json");
    side << sidecar.dump(2) << "\n";
  }
}

inline std::vector<PixelSample> read_pixel_records(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("read_pixel_records: cannot open " + path);
  std::vector<PixelSample> out;
  while (true) {
    int c = f.peek();
    if (c == std::ifstream::traits_type::eof()) break;
    std::uint16_t h = detail::get_u16le(f);
    std::uint16_t w = detail::get_u16le(f);
    if (!f) throw ParseError("read_pixel_records: truncated header in " + path);
    std::vector<std::uint8_t> grid(static_cast<std::size_t>(h) * w);
    f.read(reinterpret_cast<char*>(grid.data()), static_cast<std::streamsize>(grid.size()));
    char lb;
    f.read(&lb, 1);
    if (!f) throw ParseError("read_pixel_records: truncated record in " + path);
    out.push_back({image_to_sequence(grid, h, w), static_cast<unsigned char>(lb)});
  }
  return out;
}

}  // namespace arena::tasks
