#pragma once

#include <vector>

#include "tabletrec/pipeline.hpp"
#include "tabletrec/vec.hpp"

namespace tabletrec {

struct LabeledPointCloud {
  std::vector<Vec3> points;
  std::vector<int> labels;
};

struct GeometryMetrics {
  double comp = 0;    // mean gt -> pred nearest distance
  double acc = 0;     // mean pred -> gt nearest distance
  double recall = 0;  // fraction of gt within tau of pred
  double prec = 0;    // fraction of pred within tau of gt
  double fscore = 0;
};

// Murez-style 3D metrics at distance threshold tau. Throws on empty clouds.
GeometryMetrics geometry_metrics(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt,
                                 double tau = 0.05);

// One point per texel with alpha > 0.5, labeled with the plane instance id.
LabeledPointCloud sample_planeset(const PlaneSet& planes);

// Nearest sampled plane point donates its instance id to each gt vertex.
// Empty plane sets produce all -1 labels.
std::vector<int> transfer_labels(const PlaneSet& planes, const std::vector<Vec3>& gt_vertices);

struct SegmentationScores {
  double voi = 0;  // variation of information (natural log)
  double ri = 0;   // rand index
  double sc = 0;   // segmentation covering, gt regions covered by pred
};

// Pairwise/entropy clustering agreement; ignores entries with negative labels
// in neither — lengths must match. Throws on length mismatch.
SegmentationScores segmentation_scores(const std::vector<int>& pred, const std::vector<int>& gt);

}  // namespace tabletrec
