#pragma once

#include "dualaug/skeleton.hpp"

#include <string>
#include <vector>

namespace dualaug {

inline constexpr double kPckThresholdMm = 150.0;

double mpjpe(const Pose3D& pred, const Pose3D& gt);

// Similarity-aligns pred onto gt (rotation without reflection, translation,
// uniform scale) before MPJPE. Throws DegenerateError if pred has no spread.
double pa_mpjpe(const Pose3D& pred, const Pose3D& gt);
Pose3D procrustes_align(const Pose3D& pred, const Pose3D& gt);

// Percentage of joints, pooled over all poses, with error strictly below the threshold.
double pck(const std::vector<Pose3D>& preds, const std::vector<Pose3D>& gts, double threshold_mm = kPckThresholdMm);
// Mean PCK over thresholds 0, 5, ..., 150 mm.
double auc(const std::vector<Pose3D>& preds, const std::vector<Pose3D>& gts);

struct MetricSummary {
  std::string domain;
  double mpjpe = 0.0;
  double pa_mpjpe = 0.0;
  double pck150 = 0.0;
  double auc = 0.0;
  std::size_t n = 0;
};

MetricSummary summarize(const std::string& domain, const std::vector<Pose3D>& preds, const std::vector<Pose3D>& gts);

// "domain,mpjpe,pa_mpjpe,pck150,auc,n"
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricSummary& m);

}  // namespace dualaug
