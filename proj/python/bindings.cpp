#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "moral_lens/compass.hpp"
#include "moral_lens/errors.hpp"
#include "moral_lens/instrument.hpp"
#include "moral_lens/metrics.hpp"
#include "moral_lens/parser.hpp"
#include "moral_lens/prompt.hpp"
#include "moral_lens/runner.hpp"

namespace py = pybind11;
namespace ml = moral_lens;

namespace {

ml::ShiftEnsemble make_ensemble(const std::vector<std::tuple<std::string, std::pair<double, double>,
                                                             std::pair<double, double>>>& entries) {
  ml::ShiftEnsemble ens(ml::MoralValue{"-"}, ml::Framing::first);
  for (const auto& [id, rej, eds] : entries) {
    ens.add(ml::ShiftEntry::from_coordinates(id, {rej.first, rej.second}, {eds.first, eds.second}));
  }
  return ens;
}

std::pair<double, double> pair_of(const ml::Coordinates& c) { return {c.economic, c.social}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Moral-value conditioning and political compass scoring";

  static py::exception<ml::Error> base_error(m, "MoralLensError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ml::Error& e) {
      base_error((e.code() + ": " + e.what()).c_str());
    }
  });

  m.def("set_data_dir", [](const std::filesystem::path& p) { ml::set_data_dir(p); });
  m.def("data_dir", [] { return ml::data_dir(); });

  py::class_<ml::Instrument>(m, "Instrument")
      .def_readonly("id", &ml::Instrument::id)
      .def_property_readonly("kind", [](const ml::Instrument& i) { return std::string(ml::to_string(i.kind)); })
      .def_property_readonly("values", [](const ml::Instrument& i) {
        std::vector<std::string> out;
        for (const auto& v : i.values()) out.push_back(v.name);
        return out;
      })
      .def_property_readonly("item_count", [](const ml::Instrument& i) {
        return i.kind == ml::InstrumentKind::political ? i.propositions.size() : i.items.size();
      })
      .def("serialize", &ml::serialize_instrument);

  m.def("load_instrument", &ml::load_instrument, py::arg("path"));

  m.def(
      "build_profile",
      [](const ml::Instrument& inst, const std::string& value, const std::string& stance) {
        const auto p = ml::build_profile(inst, ml::MoralValue{value}, ml::parse_stance(stance));
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& a : p.assignments) out.emplace_back(a.item.id, a.answer);
        return out;
      },
      py::arg("instrument"), py::arg("value"), py::arg("stance"),
      "Returns [(item id, assigned answer), ...].");

  m.def(
      "render_prompt",
      [](const std::string& framing, const ml::Instrument* moral, const std::optional<std::string>& value,
         const std::optional<std::string>& stance, const ml::Instrument& pct, int proposition) {
        const auto f = ml::parse_framing(framing);
        std::optional<ml::ConditioningProfile> profile;
        if (moral != nullptr) {
          if (!value || !stance) throw ml::MissingProfileError("a moral instrument needs a value and a stance");
          profile = ml::build_profile(*moral, ml::MoralValue{*value}, ml::parse_stance(*stance));
        }
        return ml::render_prompt(f, profile ? &*profile : nullptr, pct.proposition(proposition)).body;
      },
      py::arg("framing"), py::arg("instrument"), py::arg("value"), py::arg("stance"), py::arg("pct"),
      py::arg("proposition"));

  m.def(
      "render_judge_prompt",
      [](const std::string& value, const std::string& reason) {
        return ml::render_judge_prompt(ml::MoralValue{value}, reason).body;
      },
      py::arg("value"), py::arg("reason"));

  m.def(
      "parse_response",
      [](const std::string& raw) {
        const auto p = ml::parse_response(raw);
        return std::make_tuple(p.label, p.reason);
      },
      py::arg("raw"));
  m.def("parse_judge_rating", [](const std::string& raw) { return ml::parse_judge_rating(raw); });

  py::class_<ml::WeightTable>(m, "WeightTable").def_static("load", &ml::WeightTable::load);

  m.def(
      "score",
      [](const std::map<int, int>& answers, const ml::WeightTable& weights, bool allow_partial) {
        return pair_of(ml::score_answers(
            answers, weights, allow_partial ? ml::PartialPolicy::renormalize : ml::PartialPolicy::reject));
      },
      py::arg("answers"), py::arg("weights"), py::arg("allow_partial") = false);

  m.def("shift", [](std::pair<double, double> endorse, std::pair<double, double> reject) {
    const auto d = ml::shift({endorse.first, endorse.second}, {reject.first, reject.second});
    return std::make_pair(d.d_economic, d.d_social);
  });

  m.def(
      "summarize",
      [](const std::vector<std::tuple<std::string, std::pair<double, double>, std::pair<double, double>>>& entries) {
        const auto s = ml::summarize(make_ensemble(entries));
        py::dict d;
        d["mean_shift"] = std::make_pair(s.mean_shift.economic, s.mean_shift.social);
        d["mean_magnitude"] = s.mean_magnitude;
        d["directional_bias"] = std::make_pair(s.directional_bias.economic, s.directional_bias.social);
        d["flip_rate"] = std::make_pair(s.flip_rate.economic, s.flip_rate.social);
        d["mrl"] = s.mrl ? py::cast(*s.mrl) : py::none();
        d["mrl_excluded"] = s.mrl_excluded;
        d["centroid_reject"] = pair_of(s.centroid_reject);
        d["centroid_endorse"] = pair_of(s.centroid_endorse);
        d["dispersion"] = std::make_pair(s.dispersion_reject, s.dispersion_endorse);
        return d;
      },
      py::arg("entries"), "entries: [(model_id, (reject_e, reject_s), (endorse_e, endorse_s)), ...]");

  m.def(
      "run_experiment",
      [](const std::filesystem::path& config, bool replay, std::optional<std::filesystem::path> out) {
        ml::RunOptions opts;
        opts.replay = replay;
        opts.out_dir = std::move(out);
        ml::Experiment exp(ml::ExperimentConfig::load(config), opts);
        py::gil_scoped_release release;
        const auto s = exp.run();
        py::gil_scoped_acquire acquire;
        py::dict d;
        d["run_dir"] = s.run_dir;
        d["complete_cells"] = s.complete_cells;
        d["planned_cells"] = s.planned_cells;
        d["backend_calls"] = s.backend_calls;
        return d;
      },
      py::arg("config"), py::arg("replay") = false, py::arg("out") = py::none());
}
