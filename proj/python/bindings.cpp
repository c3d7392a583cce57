#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "seatlab/checkpoint.hpp"
#include "seatlab/cli.hpp"
#include "seatlab/config.hpp"
#include "seatlab/evaluation.hpp"
#include "seatlab/grad_suite.hpp"
#include "seatlab/losses.hpp"
#include "seatlab/metrics.hpp"
#include "seatlab/ops.hpp"
#include "seatlab/selftrain.hpp"

namespace py = pybind11;
using namespace seatlab;

namespace {

using RealArray = py::array_t<Real, py::array::c_style | py::array::forcecast>;
using LabelArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const RealArray& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<Real>(a.data(), a.data() + a.size()));
}

RealArray to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  RealArray out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

LabelMap to_labels(const LabelArray& a) {
  if (a.ndim() != 2) throw std::invalid_argument("label map must be 2-D (H, W)");
  LabelMap m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.data.begin());
  return m;
}

LabelArray to_array(const LabelMap& m) {
  LabelArray out({static_cast<py::ssize_t>(m.height), static_cast<py::ssize_t>(m.width)});
  std::copy(m.data.begin(), m.data.end(), out.mutable_data());
  return out;
}

std::vector<FusedPrediction> to_predictions(const std::vector<RealArray>& probs) {
  std::vector<FusedPrediction> out;
  for (const auto& p : probs) out.push_back({to_tensor(p), 0});
  return out;
}

std::vector<Tensor> to_tensors(const std::vector<RealArray>& arrays) {
  std::vector<Tensor> out;
  for (const auto& a : arrays) out.push_back(to_tensor(a));
  return out;
}

std::vector<LabelMap> to_label_maps(const std::vector<LabelArray>& arrays) {
  std::vector<LabelMap> out;
  for (const auto& a : arrays) out.push_back(to_labels(a));
  return out;
}

Split parse_split(const std::string& name) {
  for (Split s : {Split::source_train, Split::target_train, Split::target_eval, Split::source_eval}) {
    if (to_string(s) == name) return s;
  }
  throw std::invalid_argument("unknown split '" + name + "'");
}

py::dict row_dict(const MetricsRow& r) {
  py::dict d;
  d["iter"] = r.iter;
  d["lr_g"] = r.lr_g;
  d["lr_d"] = r.lr_d;
  d["l_seg"] = r.l_seg;
  d["l_adv"] = r.l_adv;
  d["l_dis"] = r.l_dis;
  d["l_st"] = r.l_st;
  d["miou_target"] = r.miou_target;
  return d;
}

py::dict report_dict(const MetricsReport& r) {
  py::dict d;
  d["miou"] = r.miou;
  d["iou"] = r.iou;
  d["evaluated"] = r.evaluated;
  d["confusion"] = r.confusion;
  d["num_classes"] = r.num_classes;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Domain-adaptive segmentation with domain-specific normalization";
  m.attr("IGNORE_INDEX") = kIgnoreIndex;

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("alpha", &TrainConfig::alpha)
      .def_readwrite("beta", &TrainConfig::beta)
      .def_readwrite("psi", &TrainConfig::psi)
      .def_readwrite("max_iters", &TrainConfig::max_iters)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("stage", &TrainConfig::stage)
      .def_readwrite("lr_g", &TrainConfig::lr_g)
      .def_readwrite("lr_d", &TrainConfig::lr_d)
      .def_readwrite("eval_interval", &TrainConfig::eval_interval)
      .def_readwrite("image_size", &TrainConfig::image_size)
      .def_readwrite("num_classes", &TrainConfig::num_classes)
      .def_readwrite("widths", &TrainConfig::widths)
      .def_readwrite("n_train_src", &TrainConfig::n_train_src)
      .def_readwrite("n_train_trg", &TrainConfig::n_train_trg)
      .def_readwrite("n_eval_trg", &TrainConfig::n_eval_trg)
      .def_readwrite("n_eval_src", &TrainConfig::n_eval_src)
      .def_readwrite("data_seed", &TrainConfig::data_seed)
      .def_readwrite("style_transfer", &TrainConfig::style_transfer)
      .def_property(
          "norm_mode", [](const TrainConfig& c) { return std::string(to_string(c.norm_mode)); },
          [](TrainConfig& c, const std::string& v) { c.norm_mode = parse_norm_mode(v); })
      .def_property(
          "layer_switch", [](const TrainConfig& c) { return c.layer_switch.to_string(); },
          [](TrainConfig& c, const std::string& v) { c.layer_switch = LayerSwitchSpec::parse(v); })
      .def("get", [](const TrainConfig& c, const std::string& key) { return get_config_value(c, key); })
      .def("set", [](TrainConfig& c, const std::string& key, const std::string& value) { set_config_value(c, key, value); })
      .def("validate", &TrainConfig::validate)
      .def("to_text", [](const TrainConfig& c) { return config_to_text(c); })
      .def_static("from_text",
                  [](const std::string& text) {
                    TrainConfig c;
                    apply_config_text(c, text);
                    return c;
                  })
      .def("fingerprint", [](const TrainConfig& c) { return config_fingerprint(c); })
      .def("__repr__", [](const TrainConfig& c) { return "TrainConfig(" + config_fingerprint(c) + ")"; });
  m.def("config_keys", &config_keys);

  m.def("conv2d", [](const RealArray& x, const RealArray& w, const RealArray& b, std::size_t stride,
                     std::size_t padding) { return to_array(conv2d(to_tensor(x), to_tensor(w), to_tensor(b), stride, padding)); },
        py::arg("input"), py::arg("weight"), py::arg("bias"), py::arg("stride") = 1, py::arg("padding") = 0);
  m.def("softmax_channels", [](const RealArray& x) { return to_array(softmax_channels(to_tensor(x))); });
  m.def("bilinear_upsample", [](const RealArray& x, std::size_t h, std::size_t w) {
    return to_array(bilinear_upsample(to_tensor(x), h, w));
  });
  m.def("fuse", [](const RealArray& lower, const RealArray& higher, Real alpha) {
    return to_array(fuse(to_tensor(lower), to_tensor(higher), alpha).probs);
  });

  m.def("loss_seg", [](const std::vector<RealArray>& probs, const std::vector<LabelArray>& labels) {
    return loss_seg(to_predictions(probs), to_label_maps(labels)).item();
  });
  m.def("loss_st", [](const std::vector<RealArray>& probs, const std::vector<LabelArray>& pseudo) {
    return loss_st(to_predictions(probs), to_label_maps(pseudo)).item();
  });
  m.def("loss_dis", [](const std::vector<RealArray>& d_source, const std::vector<RealArray>& d_target) {
    return loss_dis_from_outputs(to_tensors(d_source), to_tensors(d_target)).item();
  });
  m.def("loss_adv", [](const std::vector<RealArray>& d_target) {
    return loss_adv_from_outputs(to_tensors(d_target)).item();
  });
  m.def("ce_kl_identity", [](const std::vector<Real>& a, const std::vector<Real>& b) {
    const auto r = ce_kl_identity_check(a, b);
    py::dict d;
    d["cross_entropy"] = r.cross_entropy;
    d["kl"] = r.kl;
    d["entropy"] = r.entropy;
    d["residual"] = r.residual;
    return d;
  });
  m.def("poly_lr", &poly_lr, py::arg("iter"), py::arg("max_iter"), py::arg("base_lr"), py::arg("power") = 0.9);

  m.def("argmax_map", [](const RealArray& probs) { return to_array(argmax_map(to_tensor(probs))); });
  m.def("miou", [](const std::vector<LabelArray>& preds, const std::vector<LabelArray>& gts, std::size_t num_classes) {
    return report_dict(miou(to_label_maps(preds), to_label_maps(gts), num_classes));
  });
  m.def("pseudo_label", [](const RealArray& probs, Real psi) {
    const auto r = pseudo_label_from_probs(to_tensor(probs), psi);
    return py::make_tuple(to_array(r.labels), r.coverage);
  });

  m.def(
      "generate_scene",
      [](std::uint64_t seed, const std::string& domain, std::size_t size, std::size_t num_classes) {
        const DomainBatch b = generate_scene(seed, parse_domain(domain), SceneSpec::defaults(size, num_classes));
        return py::make_tuple(to_array(b.image), to_array(*b.label));
      },
      py::arg("seed"), py::arg("domain") = "source", py::arg("size") = 64, py::arg("num_classes") = 5);

  m.def(
      "train",
      [](const TrainConfig& cfg, std::optional<std::filesystem::path> checkpoint) {
        RunResult r;
        {
          py::gil_scoped_release release;
          r = train_run(cfg, cfg.make_dataset());
          if (checkpoint) save_checkpoint(*checkpoint, *r.state, cfg);
        }
        py::list history;
        for (const auto& row : r.history) history.append(row_dict(row));
        return history;
      },
      py::arg("config"), py::arg("checkpoint") = py::none(),
      "Train one stage; returns the metrics rows and optionally saves a checkpoint.");
  m.def(
      "evaluate",
      [](const std::filesystem::path& checkpoint, const std::string& split, const std::string& layer_switch) {
        TrainConfig cfg;
        auto state = load_checkpoint(checkpoint, &cfg);
        const auto data = cfg.make_dataset();
        return report_dict(
            evaluate_split(state->g, data, parse_split(split), cfg.alpha, LayerSwitchSpec::parse(layer_switch)));
      },
      py::arg("checkpoint"), py::arg("split") = "target_eval", py::arg("layer_switch") = "");

  m.def(
      "gradient_suite",
      [](std::size_t seeds) {
        const auto r = run_gradient_suite(seeds);
        py::list out;
        for (const auto& e : r.entries) {
          py::dict d;
          d["name"] = e.name;
          d["max_rel_error"] = e.max_rel_error;
          d["checked"] = e.checked;
          d["skipped"] = e.skipped;
          out.append(d);
        }
        return out;
      },
      py::arg("seeds") = 3);

  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"seatlab"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      "Run the command-line tool in-process; returns (exit code, stdout, stderr).");
}
