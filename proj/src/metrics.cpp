#include "rcf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "rcf/geometry.hpp"

namespace rcf {

namespace {

int horizon_step(Scalar horizon_s) {
  const Scalar steps = horizon_s / kTrajectoryDt;
  const int k = static_cast<int>(std::lround(steps));
  if (std::abs(steps - k) > 1e-9 || k < 1) {
    throw std::invalid_argument("horizon must be a positive multiple of the 0.5 s step");
  }
  return k;
}

Scalar plan_heading(const PointsXY& plan, int step) {
  const Vec2 cur = plan.row(step - 1).transpose();
  const Vec2 prev = step >= 2 ? Vec2(plan.row(step - 2).transpose()) : Vec2::Zero();
  const Vec2 d = cur - prev;
  if (d.norm() < 1e-9) return 0.0;
  return std::atan2(d.y(), d.x());
}

}  // namespace

VecX l2_at_horizons(const PointsXY& plan, const PointsXY& gt_future,
                    const std::vector<Scalar>& horizons_s) {
  VecX out(static_cast<Eigen::Index>(horizons_s.size()));
  for (size_t h = 0; h < horizons_s.size(); ++h) {
    const int k = horizon_step(horizons_s[h]);
    if (k > plan.rows() || k > gt_future.rows()) {
      throw std::invalid_argument("l2_at_horizons: horizon beyond plan length");
    }
    out(static_cast<Eigen::Index>(h)) = (plan.row(k - 1) - gt_future.row(k - 1)).norm();
  }
  return out;
}

VecX collision_rate(const std::vector<PlanningRecord>& records,
                    const std::vector<Scalar>& horizons_s, const EgoFootprint& ego) {
  VecX out = VecX::Zero(static_cast<Eigen::Index>(horizons_s.size()));
  if (records.empty()) return out;
  for (size_t h = 0; h < horizons_s.size(); ++h) {
    const int kh = horizon_step(horizons_s[h]);
    int collided = 0;
    for (const auto& rec : records) {
      bool hit = false;
      const int steps = std::min<int>(kh, static_cast<int>(rec.plan.rows()));
      for (int k = 1; k <= steps && !hit; ++k) {
        OrientedBox2D ebox;
        ebox.center = rec.plan.row(k - 1).transpose();
        ebox.yaw = plan_heading(rec.plan, k);
        ebox.half_extents = Vec2(0.5 * ego.width, 0.5 * ego.length);
        if (static_cast<size_t>(k - 1) >= rec.agent_boxes.size()) break;
        for (const auto& abox : rec.agent_boxes[static_cast<size_t>(k - 1)]) {
          if (boxes_overlap(ebox, abox)) {
            hit = true;
            break;
          }
        }
      }
      collided += hit ? 1 : 0;
    }
    out(static_cast<Eigen::Index>(h)) = 100.0 * collided / records.size();
  }
  return out;
}

VecX tpc(const std::vector<PlanningRecord>& records, const std::vector<Scalar>& horizons_s) {
  VecX acc = VecX::Zero(static_cast<Eigen::Index>(horizons_s.size()));
  int counted = 0;
  for (const auto& rec : records) {
    if (!rec.has_previous) continue;
    counted++;
    for (size_t h = 0; h < horizons_s.size(); ++h) {
      const int kh = horizon_step(horizons_s[h]);
      // Current step k aligns with previous-plan step k+1 (one 0.5 s shift).
      const int overlap = std::min<int>({kh, static_cast<int>(rec.plan.rows()),
                                         static_cast<int>(rec.previous_plan.rows()) - 1});
      Scalar disp = 0.0;
      for (int k = 1; k <= overlap; ++k) {
        const Vec2 prev_pt =
            transform_point(rec.prev_to_current, Vec2(rec.previous_plan.row(k).transpose()));
        disp += (Vec2(rec.plan.row(k - 1).transpose()) - prev_pt).norm();
      }
      acc(static_cast<Eigen::Index>(h)) += overlap > 0 ? disp / overlap : 0.0;
    }
  }
  if (counted > 0) acc /= counted;
  return acc;
}

PlanningMetrics planning_metrics(const std::vector<PlanningRecord>& records,
                                 const std::vector<Scalar>& horizons_s, const EgoFootprint& ego) {
  PlanningMetrics m;
  m.horizons_s = horizons_s;
  const Eigen::Index n = static_cast<Eigen::Index>(horizons_s.size());
  m.l2 = VecX::Zero(n);
  if (!records.empty()) {
    for (const auto& rec : records) m.l2 += l2_at_horizons(rec.plan, rec.gt_future, horizons_s);
    m.l2 /= static_cast<Scalar>(records.size());
  }
  m.collision_pct = collision_rate(records, horizons_s, ego);
  m.tpc_m = tpc(records, horizons_s);
  m.l2_avg = n > 0 ? m.l2.mean() : 0.0;
  m.collision_avg = n > 0 ? m.collision_pct.mean() : 0.0;
  m.tpc_avg = n > 0 ? m.tpc_m.mean() : 0.0;
  return m;
}

MotionMetrics motion_metrics(const std::vector<MotionRecord>& records, Scalar match_threshold) {
  MotionMetrics m;
  Scalar ade_acc = 0.0, fde_acc = 0.0;
  int misses = 0, hits = 0;
  for (const auto& rec : records) {
    m.gt_count += static_cast<int>(rec.gts.size());
    std::vector<size_t> order(rec.predictions.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return rec.predictions[a].score > rec.predictions[b].score;
    });
    std::vector<char> gt_taken(rec.gts.size(), 0);
    for (size_t oi : order) {
      const auto& pred = rec.predictions[oi];
      int best = -1;
      Scalar best_d = match_threshold;
      for (size_t g = 0; g < rec.gts.size(); ++g) {
        if (gt_taken[g]) continue;
        const Scalar d = (pred.center - rec.gts[g].center).norm();
        if (d <= best_d) {
          best_d = d;
          best = static_cast<int>(g);
        }
      }
      if (best < 0) {
        m.false_positives++;
        continue;
      }
      gt_taken[static_cast<size_t>(best)] = 1;
      m.matched++;
      Scalar bad = std::numeric_limits<Scalar>::infinity();
      Scalar bfd = std::numeric_limits<Scalar>::infinity();
      for (const auto& mode : pred.modes) {
        const Eigen::Index steps = std::min(mode.rows(), rec.gts[static_cast<size_t>(best)].future.rows());
        Scalar a = 0.0;
        for (Eigen::Index k = 0; k < steps; ++k) {
          a += (mode.row(k) - rec.gts[static_cast<size_t>(best)].future.row(k)).norm();
        }
        a = steps > 0 ? a / steps : 0.0;
        const Scalar f = steps > 0 ? (mode.row(steps - 1) -
                                      rec.gts[static_cast<size_t>(best)].future.row(steps - 1))
                                         .norm()
                                   : 0.0;
        bad = std::min(bad, a);
        bfd = std::min(bfd, f);
      }
      if (pred.modes.empty()) bad = bfd = 0.0;
      ade_acc += bad;
      fde_acc += bfd;
      if (bfd > 2.0) {
        misses++;
      } else {
        hits++;
      }
    }
  }
  if (m.matched > 0) {
    m.min_ade = ade_acc / m.matched;
    m.min_fde = fde_acc / m.matched;
    m.miss_rate = static_cast<Scalar>(misses) / m.matched;
  }
  m.epa = m.gt_count > 0
              ? (static_cast<Scalar>(hits) - 0.5 * m.false_positives) / m.gt_count
              : 0.0;
  return m;
}

namespace {

struct ApSample {
  Scalar score;
  bool tp;
};

// nuScenes-style AP: 101-point interpolated precision over recall, the
// recall <= 0.1 region dropped, precision shifted by 0.1, normalized by 0.9.
Scalar average_precision(std::vector<ApSample> samples, int num_gt) {
  if (num_gt == 0 || samples.empty()) return 0.0;
  std::stable_sort(samples.begin(), samples.end(),
                   [](const ApSample& a, const ApSample& b) { return a.score > b.score; });
  std::vector<Scalar> recalls, precisions;
  int tp = 0, fp = 0;
  for (const auto& s : samples) {
    (s.tp ? tp : fp)++;
    recalls.push_back(static_cast<Scalar>(tp) / num_gt);
    precisions.push_back(static_cast<Scalar>(tp) / (tp + fp));
  }
  Scalar acc = 0.0;
  for (int i = 11; i <= 100; ++i) {
    const Scalar r = 0.01 * i;
    // Interpolated precision at recall r (0 beyond the achieved recall).
    Scalar p = 0.0;
    for (size_t k = 0; k < recalls.size(); ++k) {
      if (recalls[k] >= r - 1e-12) {
        p = *std::max_element(precisions.begin() + static_cast<long>(k), precisions.end());
        break;
      }
    }
    acc += std::max(0.0, p - 0.1);
  }
  return acc / 90.0 / 0.9;
}

}  // namespace

DetectionMetrics detection_map(const std::vector<DetectionRecord>& records,
                               const std::vector<Scalar>& dist_thresholds) {
  DetectionMetrics out;

  std::set<int> classes;
  for (const auto& rec : records) {
    for (const auto& g : rec.gts) classes.insert(g.class_id);
    for (const auto& p : rec.predictions) classes.insert(p.class_id);
  }
  if (classes.empty()) return out;

  Scalar ap_sum = 0.0;
  int ap_terms = 0;
  for (int cls : classes) {
    Scalar cls_ap = 0.0;
    for (Scalar thr : dist_thresholds) {
      std::vector<ApSample> samples;
      int num_gt = 0;
      for (const auto& rec : records) {
        std::vector<size_t> order;
        for (size_t i = 0; i < rec.predictions.size(); ++i) {
          if (rec.predictions[i].class_id == cls) order.push_back(i);
        }
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
          return rec.predictions[a].score > rec.predictions[b].score;
        });
        std::vector<char> taken(rec.gts.size(), 0);
        for (size_t g = 0; g < rec.gts.size(); ++g) {
          if (rec.gts[g].class_id == cls) num_gt++;
        }
        for (size_t oi : order) {
          int best = -1;
          Scalar best_d = thr;
          for (size_t g = 0; g < rec.gts.size(); ++g) {
            if (taken[g] || rec.gts[g].class_id != cls) continue;
            const Scalar d = (rec.predictions[oi].center - rec.gts[g].center).norm();
            if (d <= best_d) {
              best_d = d;
              best = static_cast<int>(g);
            }
          }
          if (best >= 0) taken[static_cast<size_t>(best)] = 1;
          samples.push_back({rec.predictions[oi].score, best >= 0});
        }
      }
      const Scalar ap = average_precision(std::move(samples), num_gt);
      cls_ap += ap;
      ap_sum += ap;
      ap_terms++;
    }
    out.ap_per_class[cls] = cls_ap / dist_thresholds.size();
  }
  out.mean_ap = ap_terms > 0 ? ap_sum / ap_terms : 0.0;

  // True-positive errors: class-agnostic greedy match at 2 m so velocity and
  // attribute quality are measured even when the class is wrong.
  Scalar ate = 0.0, ase = 0.0, aoe = 0.0, ave = 0.0, aae = 0.0;
  int matches = 0;
  for (const auto& rec : records) {
    std::vector<size_t> order(rec.predictions.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return rec.predictions[a].score > rec.predictions[b].score;
    });
    std::vector<char> taken(rec.gts.size(), 0);
    for (size_t oi : order) {
      const auto& p = rec.predictions[oi];
      int best = -1;
      Scalar best_d = 2.0;
      for (size_t g = 0; g < rec.gts.size(); ++g) {
        if (taken[g]) continue;
        const Scalar d = (p.center - rec.gts[g].center).norm();
        if (d <= best_d) {
          best_d = d;
          best = static_cast<int>(g);
        }
      }
      if (best < 0) continue;
      taken[static_cast<size_t>(best)] = 1;
      const auto& g = rec.gts[static_cast<size_t>(best)];
      matches++;
      ate += best_d;
      ase += 1.0 - aligned_iou_3d(p.size, g.size);
      Scalar dyaw = std::abs(p.yaw - g.yaw);
      while (dyaw > M_PI) dyaw = std::abs(dyaw - 2.0 * M_PI);
      aoe += dyaw;
      ave += (p.velocity - g.velocity).norm();
      aae += p.class_id == g.class_id ? 0.0 : 1.0;
    }
  }
  if (matches > 0) {
    out.mate = ate / matches;
    out.mase = ase / matches;
    out.maoe = aoe / matches;
    out.mave = ave / matches;
    out.maae = aae / matches;
  } else {
    out.mate = out.mase = out.maoe = out.mave = out.maae = 1.0;
  }
  return out;
}

Scalar nds(Scalar mean_ap, const std::array<Scalar, 5>& tp_errors) {
  Scalar acc = 5.0 * mean_ap;
  for (Scalar err : tp_errors) acc += 1.0 - std::min(1.0, err);
  return acc / 10.0;
}

Scalar nds(const DetectionMetrics& m) {
  return nds(m.mean_ap, {m.mate, m.mase, m.maoe, m.mave, m.maae});
}

}  // namespace rcf
