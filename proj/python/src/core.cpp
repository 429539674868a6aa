// Copyright 2026 The relightnav Authors
// SPDX-License-Identifier: Apache-2.0

// Python bindings: scenes, probe fields, baked and relit rendering, light
// editing, SH helpers and the navigation environment. Images come back as
// numpy arrays; heavy calls release the GIL.

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>
#include <memory>
#include <optional>

#include "rns/env.hpp"
#include "rns/image_io.hpp"
#include "rns/relight.hpp"
#include "rns/render.hpp"
#include "rns/scene.hpp"
#include "rns/server.hpp"

namespace py = pybind11;
using namespace rns;

namespace {

using Pose = std::array<double, 4>;  // x, y, z, yaw (deg)

Camera pose_camera(const Pose& p, int width, int height, double hfov_deg) {
  return Camera::drone(Vec3(p[0], p[1], p[2]), p[3] * kPi / 180.0, width, height, hfov_deg * kPi / 180.0);
}

py::array_t<std::uint8_t> image_array(const Image8& img) {
  py::array_t<std::uint8_t> out({img.height, img.width, 3});
  std::copy(img.data.begin(), img.data.end(), out.mutable_data());
  return out;
}

py::array_t<float> rgb_array(const FrameBuffer& fb) {
  py::array_t<float> out({fb.height, fb.width, 3});
  std::copy(fb.rgb.begin(), fb.rgb.end(), out.mutable_data());
  return out;
}

py::object frame_result(const FrameBuffer& fb, bool linear) {
  if (linear) return rgb_array(fb);
  return image_array(to_rgb8(fb));
}

py::array_t<double> coeff_array(const sh::ShCoeffs& c) {
  py::array_t<double> out({c.channels(), sh::coeff_count(c.degree())});
  std::copy(c.values().begin(), c.values().end(), out.mutable_data());
  return out;
}

sh::ShCoeffs coeffs_from(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw InputError("SH coefficients must be a (channels, (degree+1)^2) array");
  const int k = static_cast<int>(a.shape(1));
  const int degree = static_cast<int>(std::lround(std::sqrt(static_cast<double>(k)))) - 1;
  if (degree < 0 || sh::coeff_count(degree) != k) throw InputError("coefficient count is not a square");
  return sh::ShCoeffs(degree, static_cast<int>(a.shape(0)), std::vector<double>(a.data(), a.data() + a.size()));
}

py::object json_to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

py::dict observation_dict(const Observation& obs) {
  py::dict d;
  d["image"] = image_array(obs.image);
  d["state"] = py::array_t<float>(obs.state.size(), obs.state.data());
  return d;
}

// Scene, field and light bundled into what an Environment needs.
std::shared_ptr<const EnvAssets> assets_for(std::shared_ptr<const SceneModel> scene,
                                            std::shared_ptr<const OcclusionField> field, const EnvConfig& cfg) {
  return make_assets(scene, field, cfg, default_sky_light(scene->degree));
}

EnvConfig config_from(const py::object& cfg) {
  if (cfg.is_none()) return EnvConfig{};
  const std::string text = py::str(py::module_::import("json").attr("dumps")(cfg));
  return config_from_json(nlohmann::json::parse(text));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Relightable Gaussian splat simulator for UAV navigation";

  static py::exception<ParseError> parse_error(m, "ParseError", PyExc_ValueError);
  static py::exception<ProtocolError> protocol_error(m, "ProtocolError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ParseError& e) {
      PyErr_SetString(parse_error.ptr(), e.what());
    } catch (const ProtocolError& e) {
      PyErr_SetString(protocol_error.ptr(), e.what());
    }
  });

  // SH helpers.
  m.def("sh_eval", &sh::eval_basis, py::arg("degree"), py::arg("direction"),
        "Real SH basis Y_lm(direction), index l*l + l + m.");
  m.def(
      "sh_rotate_z",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& c, double angle) {
        return coeff_array(sh::rotate_z(coeffs_from(c), angle));
      },
      py::arg("coeffs"), py::arg("angle"), "Rotate (channels, K) coefficients about +z by `angle` radians.");

  py::class_<SceneModel, std::shared_ptr<SceneModel>>(m, "Scene")
      .def_readonly("degree", &SceneModel::degree)
      .def_readonly("ground_z", &SceneModel::ground_z)
      .def("__len__", [](const SceneModel& s) { return s.gaussians.size(); })
      .def_property_readonly("bounds",
                             [](const SceneModel& s) { return std::make_pair(Vec3(s.bounds.min), Vec3(s.bounds.max)); })
      .def_property_readonly("means",
                             [](const SceneModel& s) {
                               py::array_t<float> out({static_cast<py::ssize_t>(s.gaussians.size()), py::ssize_t{3}});
                               auto v = out.mutable_unchecked<2>();
                               for (std::size_t i = 0; i < s.gaussians.size(); ++i)
                                 for (int a = 0; a < 3; ++a) v(i, a) = s.gaussians[i].mean[a];
                               return out;
                             })
      .def_property_readonly("albedo",
                             [](const SceneModel& s) {
                               py::array_t<float> out({static_cast<py::ssize_t>(s.gaussians.size()), py::ssize_t{3}});
                               auto v = out.mutable_unchecked<2>();
                               for (std::size_t i = 0; i < s.gaussians.size(); ++i)
                                 for (int a = 0; a < 3; ++a) v(i, a) = s.gaussians[i].albedo[a];
                               return out;
                             })
      .def("save", [](const SceneModel& s, const std::filesystem::path& p) { save_scene(s, p); }, py::arg("path"));

  m.def("load_scene", [](const std::filesystem::path& p) { return std::make_shared<SceneModel>(load_scene(p)); },
        py::arg("path"));
  m.def(
      "gen_forest",
      [](std::uint64_t seed, int trees, double size) {
        ForestParams p;
        p.seed = seed;
        p.n_trees = trees;
        p.area_min = {-size / 2, -size / 2};
        p.area_max = {size / 2, size / 2};
        py::gil_scoped_release release;
        return std::make_shared<SceneModel>(gen_forest(p));
      },
      py::arg("seed") = 1, py::arg("trees") = 50, py::arg("size") = 60.0,
      "Procedural forest on a size x size square centred at the origin.");

  py::class_<OcclusionField, std::shared_ptr<OcclusionField>>(m, "OcclusionField")
      .def_readonly("degree", &OcclusionField::degree)
      .def_readonly("d_thresh", &OcclusionField::d_thresh)
      .def_property_readonly("dims", [](const OcclusionField& f) { return f.grid.dims; })
      .def_property_readonly("origin", [](const OcclusionField& f) { return f.grid.origin; })
      .def_property_readonly("cell", [](const OcclusionField& f) { return f.grid.cell; })
      .def_property_readonly("coeffs",
                             [](const OcclusionField& f) {
                               const auto& d = f.grid.dims;
                               py::array_t<float> out({d[2], d[1], d[0], sh::coeff_count(f.degree)});
                               std::copy(f.coeffs.begin(), f.coeffs.end(), out.mutable_data());
                               return out;
                             })
      .def(
          "at",
          [](const OcclusionField& f, const Vec3& p, const Vec3& normal) {
            return coeff_array(interpolate_occlusion(f, p, normal)).attr("reshape")(-1);
          },
          py::arg("position"), py::arg("normal") = Vec3::Zero(),
          "Interpolated visibility SH at a position; a zero normal keeps every probe.")
      .def(
          "save", [](const OcclusionField& f, const std::filesystem::path& p) { save_occlusion_field(f, p); },
          py::arg("path"));

  m.def("load_occlusion_field",
        [](const std::filesystem::path& p) { return std::make_shared<OcclusionField>(load_occlusion_field(p)); },
        py::arg("path"));
  m.def(
      "build_occlusion_field",
      [](const SceneModel& scene, double cell, double thresh, int resolution, const std::string& method,
         unsigned threads) {
        if (method != "ray" && method != "splat") throw InputError("method must be 'ray' or 'splat'");
        FieldBuildOptions o;
        o.d_thresh = thresh;
        o.face_resolution = resolution;
        o.degree = scene.degree;
        o.threads = threads;
        o.method = method == "ray" ? ProbeMethod::kRay : ProbeMethod::kSplat;
        const GridSpec g = grid_for_scene(scene, cell);
        py::gil_scoped_release release;
        return std::make_shared<OcclusionField>(build_occlusion_field(scene, g, o));
      },
      py::arg("scene"), py::arg("cell") = 1.0, py::arg("thresh") = kDefaultDepthThreshold,
      py::arg("resolution") = kDefaultProbeResolution, py::arg("method") = "ray", py::arg("threads") = 0u);

  py::class_<EnvLight>(m, "Light")
      .def_readonly("name", &EnvLight::name)
      .def_property_readonly("degree", &EnvLight::degree)
      .def_property_readonly("coeffs", [](const EnvLight& l) { return coeff_array(l.coeffs); })
      .def(
          "edited",
          [](const EnvLight& l, double rotate_deg, double intensity, const Vec3& tint) {
            return edit_light(l, {rotate_deg * kPi / 180.0, intensity, tint});
          },
          py::arg("rotate_deg") = 0.0, py::arg("intensity") = 1.0, py::arg("tint") = Vec3::Ones(),
          "tint * intensity * (light rotated about +z).");

  m.def("default_sky_light", &default_sky_light, py::arg("degree") = sh::kDefaultDegree);
  m.def(
      "constant_light", [](int degree, const Vec3& radiance) { return constant_light(degree, radiance); },
      py::arg("degree"), py::arg("radiance"));
  m.def(
      "light_from_coeffs",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& c) {
        EnvLight l;
        l.coeffs = coeffs_from(c);
        if (l.coeffs.channels() != 3) throw InputError("light coefficients need 3 channels");
        l.name = "custom";
        return l;
      },
      py::arg("coeffs"));
  m.def("load_light_spec", [](const std::filesystem::path& p, int degree) {
    return load_light_spec(p, default_sky_light(degree));
  }, py::arg("path"), py::arg("degree") = sh::kDefaultDegree);
  m.def("light_presets", [] {
    py::list out;
    for (const auto& p : light_presets())
      out.append(py::make_tuple(p.name, p.edit.rotation * 180.0 / kPi, p.edit.intensity, p.edit.tint));
    return out;
  }, "(name, rotate_deg, intensity, tint) for each preset edit.");

  m.def(
      "render_baked",
      [](const SceneModel& scene, const Pose& pose, int width, int height, double hfov_deg, bool linear) {
        FrameBuffer fb;
        {
          py::gil_scoped_release release;
          fb = render_baked(scene, pose_camera(pose, width, height, hfov_deg));
        }
        return frame_result(fb, linear);
      },
      py::arg("scene"), py::arg("pose"), py::arg("width") = 96, py::arg("height") = 64, py::arg("hfov_deg") = 90.0,
      py::arg("linear") = false,
      "Baked-colour frame from pose (x, y, z, yaw_deg); uint8 HxWx3, or linear float with linear=True.");

  py::class_<RelitContext, std::shared_ptr<RelitContext>>(m, "RelitContext")
      .def(py::init([](std::shared_ptr<SceneModel> scene, std::shared_ptr<OcclusionField> field) {
             py::gil_scoped_release release;
             return std::make_shared<RelitContext>(scene, field);
           }),
           py::arg("scene"), py::arg("field"))
      .def(
          "render",
          [](const RelitContext& ctx, const Pose& pose, std::optional<EnvLight> light, int width, int height,
             double hfov_deg, bool linear) {
            const EnvLight l = light ? *light : default_sky_light(ctx.scene().degree);
            FrameBuffer fb;
            {
              py::gil_scoped_release release;
              fb = ctx.render(pose_camera(pose, width, height, hfov_deg), l);
            }
            return frame_result(fb, linear);
          },
          py::arg("pose"), py::arg("light") = py::none(), py::arg("width") = 96, py::arg("height") = 64,
          py::arg("hfov_deg") = 90.0, py::arg("linear") = false,
          "Relit frame under `light` (default sky); uint8 HxWx3, or linear float with linear=True.")
      .def(
          "colors",
          [](const RelitContext& ctx, const EnvLight& light) {
            const auto c = ctx.colors(light);
            py::array_t<float> out({static_cast<py::ssize_t>(c.size()), py::ssize_t{3}});
            auto v = out.mutable_unchecked<2>();
            for (std::size_t i = 0; i < c.size(); ++i)
              for (int a = 0; a < 3; ++a) v(i, a) = c[i][a];
            return out;
          },
          py::arg("light"), "Per-Gaussian linear colour under `light`.");

  py::class_<Environment>(m, "Environment")
      .def(py::init([](std::shared_ptr<SceneModel> scene, std::shared_ptr<OcclusionField> field,
                       const py::object& config) {
             const EnvConfig cfg = config_from(config);
             return std::make_unique<Environment>(assets_for(scene, field, cfg), cfg);
           }),
           py::arg("scene"), py::arg("field"), py::arg("config") = py::none(),
           "Navigation environment; `config` is a dict in the --config JSON layout.")
      .def(
          "reset",
          [](Environment& env, std::uint64_t seed, std::optional<int> stage) {
            Observation obs;
            {
              py::gil_scoped_release release;
              obs = stage ? env.reset(seed, static_cast<Stage>(*stage)) : env.reset(seed);
            }
            return observation_dict(obs);
          },
          py::arg("seed"), py::arg("stage") = py::none())
      .def(
          "step",
          [](Environment& env, double action) {
            StepResult r;
            {
              py::gil_scoped_release release;
              r = env.step(action);
            }
            const py::object info = json_to_py(step_json(r, env.draw())["info"]);
            return py::make_tuple(observation_dict(r.obs), r.reward, r.done, termination_name(r.reason), info);
          },
          py::arg("action"), "Returns (obs, reward, done, reason, info).")
      .def_property_readonly("config", [](const Environment& env) { return json_to_py(config_to_json(env.config())); })
      .def_property_readonly("position", [](const Environment& env) { return env.state().p; })
      .def_property_readonly("goal", [](const Environment& env) { return env.task().goal; });
}
