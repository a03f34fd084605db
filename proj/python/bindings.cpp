#include "dualaug/augmentor.hpp"
#include "dualaug/camera.hpp"
#include "dualaug/checkpoint.hpp"
#include "dualaug/data.hpp"
#include "dualaug/errors.hpp"
#include "dualaug/estimator.hpp"
#include "dualaug/metrics.hpp"
#include "dualaug/skeleton.hpp"
#include "dualaug/trainer.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace dualaug;

namespace {

Pose3D pose(const Eigen::MatrixXd& joints) {
  if (joints.cols() != 3) throw ShapeError("joints must have three columns");
  return {joints};
}

std::vector<Pose3D> poses(const Eigen::MatrixXd& flat) {
  std::vector<Pose3D> out;
  for (Eigen::Index i = 0; i < flat.rows(); ++i) out.push_back(unflatten3(flat.row(i)));
  return out;
}

py::dict summary_dict(const MetricSummary& m) {
  py::dict d;
  d["domain"] = m.domain;
  d["mpjpe"] = m.mpjpe;
  d["pa_mpjpe"] = m.pa_mpjpe;
  d["pck150"] = m.pck150;
  d["auc"] = m.auc;
  d["n"] = m.n;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Dual-augmentor pose lifting core";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<CycleError>(m, "CycleError", base.ptr());
  py::register_exception<ArityError>(m, "ArityError", base.ptr());
  py::register_exception<BehindCameraError>(m, "BehindCameraError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<NonScalarError>(m, "NonScalarError", base.ptr());
  py::register_exception<LengthError>(m, "LengthError", base.ptr());
  py::register_exception<EmptyBatchError>(m, "EmptyBatchError", base.ptr());
  py::register_exception<DegenerateError>(m, "DegenerateError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  py::class_<Skeleton>(m, "Skeleton")
      .def(py::init([](const std::vector<int>& parents, std::vector<std::string> names) {
             return build_skeleton(parents, std::move(names));
           }),
           py::arg("parents"), py::arg("names") = std::vector<std::string>{})
      .def_readonly("names", &Skeleton::names)
      .def_readonly("parents", &Skeleton::parents)
      .def_readonly("adjacency", &Skeleton::adjacency)
      .def_readonly("laplacian", &Skeleton::laplacian)
      .def_property_readonly("joint_count", &Skeleton::joint_count)
      .def("joints_to_bones",
           [](const Skeleton& s, const Eigen::MatrixXd& joints) { return Eigen::MatrixXd(joints_to_bones(pose(joints), s).bones); })
      .def("bones_to_joints", [](const Skeleton& s, const Eigen::MatrixXd& bones, const Eigen::Vector3d& root) {
        BoneVectors b;
        b.bones = bones;
        b.root = root;
        return Eigen::MatrixXd(bones_to_joints(b, s).joints);
      }, py::arg("bones"), py::arg("root") = Eigen::Vector3d::Zero());
  m.def("human16", [] { return human16(); });

  py::class_<Camera>(m, "Camera")
      .def(py::init<>())
      .def_readwrite("fx", &Camera::fx)
      .def_readwrite("fy", &Camera::fy)
      .def_readwrite("cx", &Camera::cx)
      .def_readwrite("cy", &Camera::cy)
      .def_readwrite("subject_distance", &Camera::subject_distance)
      .def("project", [](const Camera& c, const Eigen::MatrixXd& joints) {
        return Eigen::MatrixXd(project(pose(joints), c).keypoints);
      });

  m.def("mpjpe", [](const Eigen::MatrixXd& p, const Eigen::MatrixXd& g) { return mpjpe(pose(p), pose(g)); });
  m.def("pa_mpjpe", [](const Eigen::MatrixXd& p, const Eigen::MatrixXd& g) { return pa_mpjpe(pose(p), pose(g)); });
  m.def("pck", [](const Eigen::MatrixXd& p, const Eigen::MatrixXd& g, double t) { return pck(poses(p), poses(g), t); },
        py::arg("preds"), py::arg("gts"), py::arg("threshold_mm") = kPckThresholdMm,
        "Rows are flattened poses.");
  m.def("auc", [](const Eigen::MatrixXd& p, const Eigen::MatrixXd& g) { return auc(poses(p), poses(g)); },
        "Rows are flattened poses.");

  m.def("generate_domain", [](const std::string& name, int count, std::uint64_t seed) {
    DomainSpec spec = name == "source"        ? source_spec()
                      : name == "target_near" ? target_near_spec()
                      : name == "target_far"  ? target_far_spec()
                                              : throw ParseError("unknown domain: " + name);
    spec.sample_count = count;
    spec.seed = seed;
    const Dataset ds = generate_dataset(spec, Camera{});
    return py::make_tuple(joints_matrix(ds), keypoints_matrix(ds));
  }, py::arg("name"), py::arg("count"), py::arg("seed") = 0,
        "Returns (joints N x 48, keypoints N x 32) for a shipped domain.");

  m.def("augment", [](const std::string& checkpoint, const Eigen::MatrixXd& flat, const Eigen::MatrixXd& noise) {
    const AugmentorParams aug = augmentor_from_json(parse_json_file(checkpoint));
    const BatchStates s = augment_batch(flat, noise, aug, human16());
    py::dict d;
    d["or"] = s.or_state;
    d["ba"] = s.ba;
    d["bl"] = s.bl;
    d["rt"] = s.rt;
    return d;
  }, py::arg("checkpoint"), py::arg("poses"), py::arg("noise"));

  m.def("predict", [](const std::string& checkpoint, const Eigen::MatrixXd& inputs) {
    return predict(estimator_from_json(parse_json_file(checkpoint)), inputs);
  }, py::arg("checkpoint"), py::arg("normalized_keypoints"));

  m.def("train", [](const std::string& config_json, const std::string& data_dir, const std::string& out_dir) {
    const TrainConfig cfg = train_config_from_json(nlohmann::json::parse(config_json));
    const Dataset source = load_dataset(data_dir + "/source.jsonl");
    RunReport r;
    {
      py::gil_scoped_release release;
      r = run_training(cfg, source, {source}, out_dir);
    }
    py::list out;
    for (const auto& s : r.eval) out.append(summary_dict(s));
    return out;
  }, py::arg("config_json"), py::arg("data_dir"), py::arg("out_dir"),
        "Trains on data_dir/source.jsonl and returns the source metrics.");
}
