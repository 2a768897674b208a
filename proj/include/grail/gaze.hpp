#pragma once

// Gaze heatmaps and their use as privileged information: Gaussian
// rendering from fixations, KL divergence, per-entity gaze mass,
// multi-entity aggregation and multiplicative valuation modulation.
// Also a small parametric gaze model that can be fit with the same KL
// objective.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "grail/grounding.hpp"

namespace grail {

inline constexpr double kHeatmapEps = 1e-9;

struct GazeHeatmap {
  int height = 84, width = 84;
  std::vector<double> grid;  // row-major, nonnegative, sums to 1

  static GazeHeatmap uniform(int h, int w) {
    GazeHeatmap g;
    g.height = h;
    g.width = w;
    g.grid.assign(static_cast<std::size_t>(h) * static_cast<std::size_t>(w),
                  1.0 / (static_cast<double>(h) * static_cast<double>(w)));
    return g;
  }

  double& at(int row, int col) { return grid[static_cast<std::size_t>(row * width + col)]; }
  double at(int row, int col) const { return grid[static_cast<std::size_t>(row * width + col)]; }

  double sum() const {
    double s = 0;
    for (double v : grid) s += v;
    return s;
  }

  void normalize() {
    double s = sum();
    if (s <= 0) {
      double u = 1.0 / static_cast<double>(grid.size());
      for (double& v : grid) v = u;
      return;
    }
    for (double& v : grid) v /= s;
  }
};

struct Fixation {
  double x = 0, y = 0;  // pixel coordinates
  double weight = 1.0;  // optional duration weight
};

using FixationList = std::vector<Fixation>;

struct BoundingBox {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  static BoundingBox centered(double cx, double cy, double w, double h, double frame_w,
                              double frame_h) {
    BoundingBox b;
    b.x_min = std::max(0.0, cx - w / 2);
    b.x_max = std::min(frame_w, cx + w / 2);
    b.y_min = std::max(0.0, cy - h / 2);
    b.y_max = std::min(frame_h, cy + h / 2);
    return b;
  }
};

inline constexpr double kDefaultGazeSigma = 2.0;  // pixels at 84x84

// Sum of isotropic Gaussians at the fixation points, truncated at the
// frame and renormalized. An empty fixation list yields the uniform map.
inline GazeHeatmap render_heatmap(const FixationList& fx, double sigma, int height = 84,
                                  int width = 84) {
  if (fx.empty()) return GazeHeatmap::uniform(height, width);
  if (sigma <= 0) throw std::runtime_error("render_heatmap: sigma must be positive");
  GazeHeatmap g;
  g.height = height;
  g.width = width;
  g.grid.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), 0.0);
  double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  for (const auto& f : fx) {
    for (int r = 0; r < height; ++r) {
      double dy = (r + 0.5) - f.y;
      for (int c = 0; c < width; ++c) {
        double dx = (c + 0.5) - f.x;
        g.at(r, c) += f.weight * std::exp(-(dx * dx + dy * dy) * inv2s2);
      }
    }
  }
  g.normalize();
  return g;
}

// sum_i G_i log(G_i / Ghat_i), with Ghat floored at eps and renormalized,
// and 0 log 0 = 0.
inline double kl_divergence(const GazeHeatmap& g, const GazeHeatmap& ghat) {
  if (g.height != ghat.height || g.width != ghat.width) {
    throw std::runtime_error("kl_divergence: dimension mismatch");
  }
  double floor_sum = 0;
  for (double v : ghat.grid) floor_sum += std::max(v, kHeatmapEps);
  double kl = 0;
  for (std::size_t i = 0; i < g.grid.size(); ++i) {
    double gi = g.grid[i];
    if (gi <= 0) continue;
    double qi = std::max(ghat.grid[i], kHeatmapEps) / floor_sum;
    kl += gi * std::log(gi / qi);
  }
  return std::max(0.0, kl);
}

// Mass of the cells whose centers lie inside the box (inclusive bounds).
inline double gaze_mass(const GazeHeatmap& ghat, const BoundingBox& box) {
  double s = 0;
  for (int r = 0; r < ghat.height; ++r) {
    double cy = r + 0.5;
    if (cy < box.y_min || cy > box.y_max) continue;
    for (int c = 0; c < ghat.width; ++c) {
      double cx = c + 0.5;
      if (cx < box.x_min || cx > box.x_max) continue;
      s += ghat.at(r, c);
    }
  }
  return s;
}

// Product t-conorm over per-entity scores: 1 - prod(1 - s_j).
inline double aggregate_entity_scores(const std::vector<double>& scores) {
  if (scores.empty()) throw std::runtime_error("aggregate_entity_scores: empty score list");
  double prod = 1.0;
  for (double s : scores) prod *= (1.0 - s);
  return clamp01(1.0 - prod);
}

// Per-slot boxes for a state. Asterix objects carry no extent, so they get
// a fixed window; Seaquest objects use their width/height.
inline std::vector<BoundingBox> entity_boxes(const LogicState& s, double default_box = 8.0) {
  std::vector<BoundingBox> boxes;
  for (const auto& o : s.objects) {
    double w = default_box, h = default_box;
    if (s.layout == StateLayout::Seaquest && (o.width > 0 || o.height > 0)) {
      w = std::max(o.width, 1.0);
      h = std::max(o.height, 1.0);
    }
    boxes.push_back(BoundingBox::centered(o.x, o.y, w, h, s.frame_w, s.frame_h));
  }
  return boxes;
}

// v_g[i] = v0[i] * s_i where s_i aggregates the gaze mass over the atom's
// referenced entities. Atoms referencing no screen entity keep s_i = 1.
inline ValuationVector modulate_valuation(const ValuationVector& v0, const GazeHeatmap& ghat,
                                          const AtomIndex& idx, const LogicState& s,
                                          const std::vector<BoundingBox>& boxes) {
  if (boxes.size() != s.objects.size()) {
    throw std::runtime_error("modulate_valuation: missing bounding boxes");
  }
  std::vector<double> slot_mass(boxes.size(), 0.0);
  for (std::size_t i = 0; i < boxes.size(); ++i) slot_mass[i] = gaze_mass(ghat, boxes[i]);

  ValuationVector out(v0.size());
  for (std::size_t i = 0; i < v0.size(); ++i) {
    const auto& refs = idx.entity_refs[i];
    if (refs.empty() || idx.atoms[i].sem == PredSem::DiversFull) {
      out[i] = v0[i];
      continue;
    }
    std::vector<double> scores;
    scores.reserve(refs.size());
    for (int slot : refs) scores.push_back(slot_mass[static_cast<std::size_t>(slot)]);
    out[i] = v0[i] * aggregate_entity_scores(scores);
  }
  return out;
}

// Parametric stand-in for a gaze predictor: per-type saliency logits
// weighting per-object Gaussians plus a uniform background component.
struct GazeModelParams {
  std::map<std::string, double> saliency_logits;  // per object type
  double bandwidth = 4.0;                         // shared Gaussian sigma, pixels
  double background = 0.1;                        // uniform mass in [0,1]

  std::vector<double> to_vector(const std::vector<std::string>& type_order) const {
    std::vector<double> v;
    for (const auto& t : type_order) v.push_back(saliency_logits.at(t));
    v.push_back(std::log(bandwidth));
    v.push_back(std::log(background / (1.0 - background)));
    return v;
  }
  static GazeModelParams from_vector(const std::vector<double>& v,
                                     const std::vector<std::string>& type_order) {
    GazeModelParams p;
    for (std::size_t i = 0; i < type_order.size(); ++i) p.saliency_logits[type_order[i]] = v[i];
    p.bandwidth = std::exp(v[type_order.size()]);
    p.background = sigmoid(v[type_order.size() + 1]);
    return p;
  }
};

inline GazeHeatmap predict_heatmap(const GazeModelParams& phi, const LogicState& s,
                                   const ObjectInventory& inv, int height = 84, int width = 84) {
  std::vector<double> weights(s.objects.size(), 0.0);
  double total = 0;
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    if (!s.objects[i].present) continue;
    auto it = phi.saliency_logits.find(inv.slots[i].type);
    double logit = it == phi.saliency_logits.end() ? 0.0 : it->second;
    weights[i] = std::exp(logit);
    total += weights[i];
  }
  GazeHeatmap g = GazeHeatmap::uniform(height, width);
  for (double& v : g.grid) v *= phi.background;
  if (total > 0) {
    FixationList fx;
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
      if (weights[i] <= 0) continue;
      fx.push_back({s.objects[i].x, s.objects[i].y, weights[i] / total});
    }
    GazeHeatmap mix = render_heatmap(fx, phi.bandwidth, height, width);
    for (std::size_t i = 0; i < g.grid.size(); ++i) g.grid[i] += (1.0 - phi.background) * mix.grid[i];
  }
  g.normalize();
  return g;
}

struct GazeFitOptions {
  int steps = 100;
  double learning_rate = 0.5;
  double fd_step = 1e-4;
};

struct GazeFrame {
  LogicState state;
  GazeHeatmap heatmap;
};

inline double gaze_fit_loss(const GazeModelParams& phi, const std::vector<GazeFrame>& frames,
                            const ObjectInventory& inv) {
  double total = 0;
  for (const auto& f : frames) {
    total += kl_divergence(f.heatmap, predict_heatmap(phi, f.state, inv, f.heatmap.height,
                                                      f.heatmap.width));
  }
  return total / static_cast<double>(frames.size());
}

// KL minimization by central-difference gradient descent over the few
// model parameters; keeps the best iterate.
inline GazeModelParams fit_gaze_model(const std::vector<GazeFrame>& frames,
                                      const GazeModelParams& initial, const ObjectInventory& inv,
                                      const GazeFitOptions& opts = {}) {
  if (frames.empty()) throw std::runtime_error("fit_gaze_model: empty dataset");
  std::vector<std::string> type_order;
  for (const auto& [t, v] : initial.saliency_logits) type_order.push_back(t);

  GazeModelParams best = initial;
  double best_loss = gaze_fit_loss(best, frames, inv);
  std::vector<double> theta = initial.to_vector(type_order);
  for (int step = 0; step < opts.steps; ++step) {
    std::vector<double> grad(theta.size(), 0.0);
    for (std::size_t k = 0; k < theta.size(); ++k) {
      std::vector<double> up = theta, dn = theta;
      up[k] += opts.fd_step;
      dn[k] -= opts.fd_step;
      grad[k] = (gaze_fit_loss(GazeModelParams::from_vector(up, type_order), frames, inv) -
                 gaze_fit_loss(GazeModelParams::from_vector(dn, type_order), frames, inv)) /
                (2.0 * opts.fd_step);
    }
    for (std::size_t k = 0; k < theta.size(); ++k) theta[k] -= opts.learning_rate * grad[k];
    GazeModelParams cur = GazeModelParams::from_vector(theta, type_order);
    double loss = gaze_fit_loss(cur, frames, inv);
    if (!std::isfinite(loss)) {
      throw std::runtime_error("gaze model fit diverged at step " + std::to_string(step));
    }
    if (loss < best_loss) {
      best_loss = loss;
      best = cur;
    }
  }
  return best;
}

}  // namespace grail
