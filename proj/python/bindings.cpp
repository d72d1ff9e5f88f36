#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fmt/format.h>

#include "imime/error.hpp"
#include "imime/harness.hpp"
#include "imime/learning.hpp"
#include "imime/midi.hpp"
#include "imime/vision_face.hpp"

namespace py = pybind11;
using namespace imime;

namespace {

Frame to_frame(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& image) {
  if (image.ndim() != 2) throw Error(Errc::InvalidArgument, "expected a 2-D uint8 image");
  const auto h = static_cast<int>(image.shape(0));
  const auto w = static_cast<int>(image.shape(1));
  return Frame(w, h, std::vector<std::uint8_t>(image.data(), image.data() + image.size()));
}

PixelRect to_rect(const std::tuple<int, int, int, int>& r) {
  return {std::get<0>(r), std::get<1>(r), std::get<2>(r), std::get<3>(r)};
}

py::dict event_dict(const midi::MidiEvent& e) {
  py::dict d;
  d["tick"] = e.tick;
  d["channel"] = e.channel;
  d["track"] = e.track;
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, midi::NoteOn>) {
          d["kind"] = "note_on";
          d["pitch"] = k.pitch;
          d["velocity"] = k.velocity;
        } else if constexpr (std::is_same_v<T, midi::NoteOff>) {
          d["kind"] = "note_off";
          d["pitch"] = k.pitch;
        } else if constexpr (std::is_same_v<T, midi::Tempo>) {
          d["kind"] = "tempo";
          d["us_per_quarter"] = k.us_per_quarter;
        } else {
          d["kind"] = "other";
          d["raw"] = py::bytes(reinterpret_cast<const char*>(k.raw.data()), k.raw.size());
        }
      },
      e.kind);
  return d;
}

}  // namespace

PYBIND11_MODULE(_imime, m) {
  m.doc() = "Adaptive mime character: simulation harness, learning and perception primitives.";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result(
      [&]() -> py::object { return py::exception<Error>(m, "Error", PyExc_RuntimeError); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const auto& type = error_type.get_stored();
      py::object exc = type(fmt::format("{}: {}", to_string(e.code()), e.what()));
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(type.ptr(), exc.ptr());
    }
  });

  py::class_<harness::EpisodeConfig>(m, "EpisodeConfig")
      .def(py::init<>())
      .def_readwrite("steps", &harness::EpisodeConfig::steps)
      .def_readwrite("seed", &harness::EpisodeConfig::seed)
      .def_readwrite("fps", &harness::EpisodeConfig::fps)
      .def_readwrite("change_probability", &harness::EpisodeConfig::change_probability)
      .def_readwrite("out_dir", &harness::EpisodeConfig::out_dir)
      .def_property(
          "mode", [](const harness::EpisodeConfig& c) { return std::string(to_string(c.mode)); },
          [](harness::EpisodeConfig& c, const std::string& v) {
            if (v == "labels") c.mode = harness::Mode::Labels;
            else if (v == "pixels") c.mode = harness::Mode::Pixels;
            else throw Error(Errc::ConfigError, "mode must be labels or pixels");
          })
      .def_property(
          "controller", [](const harness::EpisodeConfig& c) { return std::string(to_string(c.controller)); },
          [](harness::EpisodeConfig& c, const std::string& v) {
            if (v == "learning") c.controller = harness::Controller::Learning;
            else if (v == "random") c.controller = harness::Controller::Random;
            else throw Error(Errc::ConfigError, "controller must be learning or random");
          })
      .def_property(
          "asynchronous_values",
          [](const harness::EpisodeConfig& c) { return c.value_mode == learning::ValueMode::Asynchronous; },
          [](harness::EpisodeConfig& c, bool v) {
            c.value_mode = v ? learning::ValueMode::Asynchronous : learning::ValueMode::Synchronous;
          })
      .def_property(
          "epsilon", [](const harness::EpisodeConfig& c) { return c.learning.epsilon; },
          [](harness::EpisodeConfig& c, double v) { c.learning.epsilon = v; })
      .def_property(
          "erratic_rate", [](const harness::EpisodeConfig& c) { return c.profile.erratic_rate; },
          [](harness::EpisodeConfig& c, double v) { c.profile.erratic_rate = v; })
      .def_property_readonly("routines",
                             [](const harness::EpisodeConfig& c) {
                               std::vector<std::string> out;
                               for (auto r : c.profile.routines) out.emplace_back(to_string(r));
                               return out;
                             })
      .def_property_readonly("decision_period", &harness::EpisodeConfig::decision_period)
      .def("validate", &harness::EpisodeConfig::validate);

  m.def("load_config", &harness::load_config, py::arg("path"));
  m.def("parse_config", &harness::parse_config, py::arg("text"), py::arg("base_dir") = std::filesystem::path("."));

  py::class_<harness::EpisodeResult>(m, "EpisodeResult")
      .def_property_readonly("frames", [](const harness::EpisodeResult& r) { return r.log.rows.size(); })
      .def_property_readonly("decisions", [](const harness::EpisodeResult& r) { return r.log.decisions.size(); })
      .def_readonly("outcomes_recorded", &harness::EpisodeResult::outcomes_recorded)
      .def_readonly("greedy", &harness::EpisodeResult::greedy)
      .def_property_readonly("q", [](const harness::EpisodeResult& r) { return r.q.q; })
      .def_property_readonly("p_hat", [](const harness::EpisodeResult& r) { return r.model.p; })
      .def_property_readonly("attending",
                             [](const harness::EpisodeResult& r) {
                               std::vector<bool> out;
                               for (const auto& row : r.log.rows) out.push_back(row.attending);
                               return out;
                             })
      .def("attention_fraction",
           [](const harness::EpisodeResult& r, std::size_t count) { return harness::attention_fraction(r.log, count); },
           py::arg("count"))
      .def("episode_csv", [](const harness::EpisodeResult& r) { return harness::episode_csv(r.log); })
      .def("transitions_csv", [](const harness::EpisodeResult& r) { return harness::transitions_csv(r.log); });

  m.def("run_episode", &harness::run_episode, py::arg("config"), py::call_guard<py::gil_scoped_release>());
  m.def("write_outputs", &harness::write_outputs, py::arg("config"), py::arg("result"));

  m.def(
      "oracle_policy",
      [](const harness::EpisodeConfig& cfg) {
        const auto o = harness::oracle_policy(cfg.profile, cfg.learning.gamma);
        py::dict d;
        d["policy"] = o.policy;
        d["values"] = o.values;
        d["margin"] = o.margin();
        d["unique"] = o.unique();
        return d;
      },
      py::arg("config"));
  m.def(
      "greedy_agreement",
      [](const std::vector<std::size_t>& policy, const harness::EpisodeConfig& cfg) {
        return harness::greedy_agreement(policy, harness::oracle_policy(cfg.profile, cfg.learning.gamma));
      },
      py::arg("policy"), py::arg("config"));

  m.def("map_estimate", &learning::map_estimate, py::arg("attended"), py::arg("not_attended"));
  m.def(
      "update_values",
      [](std::size_t states, std::size_t actions, std::vector<double> p, double gamma, double tolerance) {
        learning::PolicyConfig cfg;
        cfg.gamma = gamma;
        cfg.tolerance = tolerance;
        cfg.max_sweeps = 1'000'000;
        return learning::update_values({states, actions, std::move(p)}, cfg).q.q;
      },
      py::arg("states"), py::arg("actions"), py::arg("p"), py::arg("gamma") = 0.9, py::arg("tolerance") = 1e-12);

  m.def(
      "detect_face",
      [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& image, int threshold,
         long min_area) -> std::optional<std::tuple<int, int, int, int>> {
        const auto r = face::detect_bright_blob(to_frame(image), threshold, min_area);
        if (!r) return std::nullopt;
        return std::make_tuple(r->x, r->y, r->w, r->h);
      },
      py::arg("image"), py::arg("threshold") = 125, py::arg("min_area") = 200);
  m.def(
      "symmetry_score",
      [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& image,
         const std::tuple<int, int, int, int>& rect) { return face::symmetry_score(to_frame(image), to_rect(rect)); },
      py::arg("image"), py::arg("rect"));
  m.def(
      "edge_cog_offset",
      [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& image,
         const std::tuple<int, int, int, int>& rect, double edge_threshold) {
        return face::edge_cog_offset(to_frame(image), to_rect(rect), edge_threshold);
      },
      py::arg("image"), py::arg("rect"), py::arg("edge_threshold") = 32.0);
  m.def(
      "face_orientation",
      [](double symmetry, double edge_offset) {
        const auto est = face::fuse_orientation(symmetry, edge_offset);
        return std::make_pair(std::string(to_string(est.label)), est.confidence);
      },
      py::arg("symmetry"), py::arg("edge_offset"));

  m.def(
      "decode_vlq",
      [](const py::bytes& data, std::size_t pos) {
        const std::string s = data;
        const std::vector<std::uint8_t> bytes(s.begin(), s.end());
        const auto v = midi::decode_vlq(bytes, pos);
        return std::make_pair(v, pos);
      },
      py::arg("data"), py::arg("pos") = 0);
  m.def(
      "parse_midi",
      [](const py::bytes& data) {
        const std::string s = data;
        const std::vector<std::uint8_t> bytes(s.begin(), s.end());
        const auto f = midi::parse_midi(bytes);
        py::list events;
        const auto secs = midi::event_seconds(f.events, f.division);
        for (std::size_t i = 0; i < f.events.size(); ++i) {
          auto d = event_dict(f.events[i]);
          d["seconds"] = secs[i];
          events.append(d);
        }
        py::dict out;
        out["format"] = f.format;
        out["track_count"] = f.track_count;
        out["division"] = f.division;
        out["events"] = events;
        return out;
      },
      py::arg("data"));
}
