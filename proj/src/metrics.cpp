#include "dualaug/metrics.hpp"

#include "dualaug/errors.hpp"
#include "dualaug/io.hpp"

#include <Eigen/SVD>

namespace dualaug {

namespace {

void check_pair(const Pose3D& a, const Pose3D& b) {
  if (a.joints.rows() != b.joints.rows() || a.joints.rows() == 0) throw ShapeError("poses must share a skeleton");
}

void check_sets(const std::vector<Pose3D>& preds, const std::vector<Pose3D>& gts) {
  if (preds.empty()) throw EmptyBatchError("metric needs at least one pose");
  if (preds.size() != gts.size()) throw ShapeError("prediction and ground-truth counts differ");
}

// Per-joint errors pooled over the set.
std::vector<double> joint_errors(const std::vector<Pose3D>& preds, const std::vector<Pose3D>& gts) {
  std::vector<double> out;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    check_pair(preds[i], gts[i]);
    for (Eigen::Index j = 0; j < preds[i].joints.rows(); ++j) {
      out.push_back((preds[i].joints.row(j) - gts[i].joints.row(j)).norm());
    }
  }
  return out;
}

double pck_of(const std::vector<double>& errors, double threshold) {
  std::size_t hits = 0;
  for (double e : errors) hits += e < threshold ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(errors.size());
}

}  // namespace

double mpjpe(const Pose3D& pred, const Pose3D& gt) {
  check_pair(pred, gt);
  return (pred.joints - gt.joints).rowwise().norm().mean();
}

Pose3D procrustes_align(const Pose3D& pred, const Pose3D& gt) {
  check_pair(pred, gt);
  const Eigen::RowVector3d mu_p = pred.joints.colwise().mean();
  const Eigen::RowVector3d mu_g = gt.joints.colwise().mean();
  const Joints3 p = pred.joints.rowwise() - mu_p;
  const Joints3 g = gt.joints.rowwise() - mu_g;
  const double var_p = p.squaredNorm();
  if (!(var_p > 1e-12)) throw DegenerateError("prediction has zero spread");

  // Rotation R maximising tr(R^T g^T p), applied as p * R^T.
  const Eigen::Matrix3d cov = g.transpose() * p;
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Eigen::Matrix3d r = svd.matrixU() * d * svd.matrixV().transpose();
  const double scale = (svd.singularValues().asDiagonal() * d).trace() / var_p;

  Pose3D out;
  out.joints = (scale * (p * r.transpose())).rowwise() + mu_g;
  return out;
}

double pa_mpjpe(const Pose3D& pred, const Pose3D& gt) { return mpjpe(procrustes_align(pred, gt), gt); }

double pck(const std::vector<Pose3D>& preds, const std::vector<Pose3D>& gts, double threshold_mm) {
  check_sets(preds, gts);
  return pck_of(joint_errors(preds, gts), threshold_mm);
}

double auc(const std::vector<Pose3D>& preds, const std::vector<Pose3D>& gts) {
  check_sets(preds, gts);
  const std::vector<double> errors = joint_errors(preds, gts);
  double total = 0.0;
  for (int t = 0; t <= 30; ++t) total += pck_of(errors, 5.0 * t);
  return total / 31.0;
}

MetricSummary summarize(const std::string& domain, const std::vector<Pose3D>& preds, const std::vector<Pose3D>& gts) {
  check_sets(preds, gts);
  MetricSummary m;
  m.domain = domain;
  m.n = preds.size();
  for (std::size_t i = 0; i < preds.size(); ++i) {
    m.mpjpe += mpjpe(preds[i], gts[i]);
    m.pa_mpjpe += pa_mpjpe(preds[i], gts[i]);
  }
  m.mpjpe /= static_cast<double>(m.n);
  m.pa_mpjpe /= static_cast<double>(m.n);
  m.pck150 = pck(preds, gts);
  m.auc = auc(preds, gts);
  return m;
}

std::string metrics_csv_header() { return "domain,mpjpe,pa_mpjpe,pck150,auc,n"; }

std::string metrics_csv_row(const MetricSummary& m) {
  return m.domain + "," + format_double(m.mpjpe) + "," + format_double(m.pa_mpjpe) + "," + format_double(m.pck150) +
         "," + format_double(m.auc) + "," + std::to_string(m.n);
}

}  // namespace dualaug
