#include "tabletrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "tabletrec/errors.hpp"
#include "tabletrec/kdtree.hpp"

namespace tabletrec {

GeometryMetrics geometry_metrics(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt,
                                 double tau) {
  if (pred.empty() || gt.empty()) throw Error("geometry_metrics: empty point cloud");

  const KdTree3 gt_tree{std::vector<Vec3>(gt)};
  const KdTree3 pred_tree{std::vector<Vec3>(pred)};

  GeometryMetrics m;
  size_t pred_close = 0;
  for (const Vec3& p : pred) {
    const double d = norm(p - gt_tree.point(gt_tree.knn(p, 1).front()));
    m.acc += d;
    if (d <= tau) ++pred_close;
  }
  m.acc /= double(pred.size());
  m.prec = double(pred_close) / double(pred.size());

  size_t gt_close = 0;
  for (const Vec3& g : gt) {
    const double d = norm(g - pred_tree.point(pred_tree.knn(g, 1).front()));
    m.comp += d;
    if (d <= tau) ++gt_close;
  }
  m.comp /= double(gt.size());
  m.recall = double(gt_close) / double(gt.size());

  m.fscore = (m.prec + m.recall) > 0 ? 2.0 * m.prec * m.recall / (m.prec + m.recall) : 0.0;
  return m;
}

LabeledPointCloud sample_planeset(const PlaneSet& planes) {
  LabeledPointCloud cloud;
  for (size_t id = 0; id < planes.planes.size(); ++id) {
    const Tablet& t = planes.planes[id];
    for (int i = 0; i < t.tex_rows(); ++i)
      for (int j = 0; j < t.tex_cols(); ++j) {
        if (t.alpha.at(i, j) <= 0.5) continue;
        cloud.points.push_back(t.grid_point(i + 0.5, j + 0.5));
        cloud.labels.push_back(int(id));
      }
  }
  return cloud;
}

std::vector<int> transfer_labels(const PlaneSet& planes, const std::vector<Vec3>& gt_vertices) {
  const LabeledPointCloud samples = sample_planeset(planes);
  std::vector<int> out(gt_vertices.size(), -1);
  if (samples.points.empty()) return out;
  const KdTree3 tree{std::vector<Vec3>(samples.points)};
  for (size_t i = 0; i < gt_vertices.size(); ++i)
    out[i] = samples.labels[tree.knn(gt_vertices[i], 1).front()];
  return out;
}

SegmentationScores segmentation_scores(const std::vector<int>& pred, const std::vector<int>& gt) {
  if (pred.size() != gt.size()) throw Error("segmentation_scores: label length mismatch");
  const size_t n = pred.size();
  if (n == 0) return {};

  std::map<std::pair<int, int>, size_t> joint;
  std::map<int, size_t> pred_sizes, gt_sizes;
  for (size_t i = 0; i < n; ++i) {
    ++joint[{pred[i], gt[i]}];
    ++pred_sizes[pred[i]];
    ++gt_sizes[gt[i]];
  }

  SegmentationScores s;

  // VOI = H(pred) + H(gt) - 2 I(pred; gt), natural log.
  double h_pred = 0, h_gt = 0, mi = 0;
  for (const auto& [label, count] : pred_sizes) {
    const double p = double(count) / double(n);
    h_pred -= p * std::log(p);
  }
  for (const auto& [label, count] : gt_sizes) {
    const double p = double(count) / double(n);
    h_gt -= p * std::log(p);
  }
  for (const auto& [labels, count] : joint) {
    const double pij = double(count) / double(n);
    const double pi = double(pred_sizes[labels.first]) / double(n);
    const double qj = double(gt_sizes[labels.second]) / double(n);
    mi += pij * std::log(pij / (pi * qj));
  }
  s.voi = std::max(0.0, h_pred + h_gt - 2.0 * mi);

  // Rand index from pair counts.
  auto pairs = [](size_t k) { return double(k) * double(k - 1) / 2.0; };
  double sum_joint = 0, sum_pred = 0, sum_gt = 0;
  for (const auto& [labels, count] : joint) sum_joint += pairs(count);
  for (const auto& [label, count] : pred_sizes) sum_pred += pairs(count);
  for (const auto& [label, count] : gt_sizes) sum_gt += pairs(count);
  const double total_pairs = pairs(n);
  if (total_pairs > 0) {
    const double agree_same = sum_joint;
    const double agree_diff = total_pairs - sum_pred - sum_gt + sum_joint;
    s.ri = (agree_same + agree_diff) / total_pairs;
  } else {
    s.ri = 1.0;
  }

  // Segmentation covering of gt by pred: sum |R| / N * max_R' IoU(R, R').
  for (const auto& [gt_label, gt_count] : gt_sizes) {
    double best_iou = 0;
    for (const auto& [labels, count] : joint) {
      if (labels.second != gt_label) continue;
      const double inter = double(count);
      const double uni = double(pred_sizes[labels.first]) + double(gt_count) - inter;
      best_iou = std::max(best_iou, inter / uni);
    }
    s.sc += double(gt_count) / double(n) * best_iou;
  }
  return s;
}

}  // namespace tabletrec
