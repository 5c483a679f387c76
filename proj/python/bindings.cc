/*
 * Copyright 2026 The dfprobe Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dfprobe/config.h"
#include "dfprobe/dataio.h"
#include "dfprobe/experiment.h"
#include "dfprobe/fusion.h"
#include "dfprobe/io.h"
#include "dfprobe/metrics.h"
#include "dfprobe/probe.h"
#include "dfprobe/report.h"
#include "dfprobe/schedule.h"
#include "dfprobe/search.h"

namespace py = pybind11;

namespace dfprobe {
namespace {

NoiseMode ParseNoiseMode(const std::string& s) {
  if (s == "deterministic") return NoiseMode::kDeterministic;
  if (s == "stochastic") return NoiseMode::kStochastic;
  throw InvalidArgument("unknown noise mode: " + s);
}

py::dict EvalDict(const EvalResult& r) {
  py::dict d;
  d["mAP"] = r.mAP;
  d["CP"] = r.CP;
  d["CR"] = r.CR;
  d["CF1"] = r.CF1;
  d["OP"] = r.OP;
  d["OR"] = r.OR;
  d["OF1"] = r.OF1;
  d["per_class_AP"] = r.per_class_AP;
  d["per_class_F1"] = r.per_class_F1;
  d["classes_without_positives"] = r.classes_without_positives;
  return d;
}

TrainConfig MakeTrainConfig(double lr0, int epochs, int batch_size, std::uint64_t seed,
                            bool double_precision) {
  TrainConfig cfg;
  cfg.lr0 = lr0;
  cfg.epochs = epochs;
  cfg.batch_size = batch_size;
  cfg.seed = seed;
  cfg.precision = double_precision ? Precision::kDouble : Precision::kSingle;
  cfg.Validate();
  return cfg;
}

ModalityView PooledView(const MatrixD& x) {
  ModalityView v;
  v.pooled = x;
  return v;
}

std::string RunSearch(const std::string& config_path, const std::vector<std::string>& overrides,
                      bool exhaustive) {
  const RunConfig c = LoadRunConfig(config_path, overrides);
  py::gil_scoped_release release;
  const Workspace ws(c);
  auto evaluator = ws.MakeEvaluator();
  const SearchReport r =
      exhaustive ? ExhaustiveSearch(ws.space(Modality::kImage), ws.space(Modality::kText), *evaluator, c.max_pairs)
                 : HeuristicSearch(ws.space(Modality::kImage), ws.space(Modality::kText), *evaluator,
                                   c.search_radius);
  return SearchReportJson(r);
}

}  // namespace
}  // namespace dfprobe

PYBIND11_MODULE(_core, m) {
  using namespace dfprobe;
  m.doc() = "Native core of dfprobe.";

  static py::exception<Error> error(m, "DfprobeError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const std::string msg = std::string(ErrorKindName(e.kind())) + ": " + e.what();
      PyErr_SetString(error.ptr(), msg.c_str());
    }
  });

  // Schedule.
  py::class_<NoiseSchedule>(m, "NoiseSchedule")
      .def_static("linear", &NoiseSchedule::Linear, py::arg("steps") = 1000, py::arg("beta_min") = 1e-4,
                  py::arg("beta_max") = 0.02)
      .def_property_readonly("steps", &NoiseSchedule::steps)
      .def_property_readonly("betas", [](const NoiseSchedule& s) {
        return std::vector<double>(s.betas().begin(), s.betas().end());
      })
      .def_property_readonly("alphas", [](const NoiseSchedule& s) {
        return std::vector<double>(s.alphas().begin(), s.alphas().end());
      })
      .def_property_readonly("sigmas", [](const NoiseSchedule& s) {
        return std::vector<double>(s.sigmas().begin(), s.sigmas().end());
      })
      .def("alpha", &NoiseSchedule::alpha)
      .def("sigma", &NoiseSchedule::sigma);

  m.def(
      "noise",
      [](const std::vector<float>& x0, int t, const NoiseSchedule& schedule, const std::string& mode,
         std::uint64_t seed, std::uint64_t sample_id) {
        const NoisedSample s = Noise(x0, t, schedule, ParseNoiseMode(mode), seed, sample_id);
        return py::make_tuple(s.xt, s.epsilon);
      },
      py::arg("x0"), py::arg("t"), py::arg("schedule"), py::arg("mode") = "deterministic",
      py::arg("seed") = 0, py::arg("sample_id") = 0, "Returns (x_t, epsilon).");
  m.def("continuous_to_step", &ContinuousToStep, py::arg("u"), py::arg("steps"));

  // Metrics.
  m.def(
      "average_precision",
      [](const std::vector<double>& scores, const std::vector<int>& truth) {
        std::vector<std::uint8_t> y(truth.begin(), truth.end());
        return AveragePrecision(scores, y);
      },
      py::arg("scores"), py::arg("truth"));
  m.def(
      "evaluate", [](const MatrixD& s, const MatrixD& y, double thr) { return EvalDict(Evaluate(s, y, thr)); },
      py::arg("scores"), py::arg("truth"), py::arg("threshold") = 0.5);
  m.def(
      "topk_accuracy",
      [](const MatrixD& s, const std::vector<int>& truth, int k) { return TopKAccuracy(s, truth, k); },
      py::arg("scores"), py::arg("truth_class"), py::arg("k"));
  m.def(
      "cluster_quality",
      [](const MatrixD& x, const std::vector<int>& labels) {
        const ClusterQuality q = ComputeClusterQuality(x, labels);
        py::dict d;
        d["dbi"] = q.dbi;
        d["chi"] = q.chi;
        d["silhouette"] = q.silhouette;
        return d;
      },
      py::arg("embeddings"), py::arg("labels"));
  m.def(
      "paired_t_test",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        const TTestResult r = PairedTTest(a, b);
        py::dict d;
        d["t"] = r.t_value;
        d["p"] = r.p_value;
        d["mean_diff"] = r.mean_diff;
        d["std_diff"] = r.std_diff;
        return d;
      },
      py::arg("a"), py::arg("b"));

  // Probe.
  m.def(
      "train_probe",
      [](const MatrixF& x, const MatrixD& y, const std::string& loss, double lr0, int epochs, int batch_size,
         std::uint64_t seed, bool double_precision) {
        const TrainConfig cfg = MakeTrainConfig(lr0, epochs, batch_size, seed, double_precision);
        TrainedProbe t;
        {
          py::gil_scoped_release release;
          t = TrainProbe(x, y, ParseLossKind(loss), cfg);
        }
        py::dict d;
        d["weight"] = t.model.weight;
        d["bias"] = t.model.bias;
        d["loss"] = t.log.loss;
        return d;
      },
      py::arg("features"), py::arg("labels"), py::arg("loss") = "bce_multilabel", py::arg("lr0") = 1e-3,
      py::arg("epochs") = 40, py::arg("batch_size") = 128, py::arg("seed") = 0,
      py::arg("double_precision") = false, "Returns a dict with weight, bias and the per-epoch loss.");
  m.def(
      "predict",
      [](const MatrixD& weight, const VectorD& bias, const MatrixD& x, const std::string& loss) {
        ProbeModel p;
        p.weight = weight;
        p.bias = bias;
        p.loss = ParseLossKind(loss);
        return PredictD(p, x);
      },
      py::arg("weight"), py::arg("bias"), py::arg("features"), py::arg("loss") = "bce_multilabel");

  // Fusion on pooled features.
  m.def(
      "train_fused",
      [](const MatrixD& img, const MatrixD& txt, const MatrixD& y, const std::string& strategy,
         const std::string& loss, double lr0, int epochs, int batch_size, std::uint64_t seed, int d_alg,
         int d_k, std::optional<MatrixD> img_eval, std::optional<MatrixD> txt_eval) {
        const TrainConfig cfg = MakeTrainConfig(lr0, epochs, batch_size, seed, false);
        const ModalityView iv = PooledView(img), tv = PooledView(txt);
        TrainedFusion t;
        {
          py::gil_scoped_release release;
          t = TrainFused(iv, tv, y, ParseFusionStrategy(strategy), ParseLossKind(loss), cfg, {d_alg, d_k});
        }
        py::dict d;
        d["loss"] = t.log.loss;
        const ModalityView ie = img_eval ? PooledView(*img_eval) : iv;
        const ModalityView te = txt_eval ? PooledView(*txt_eval) : tv;
        d["scores"] = PredictFused(t, ie, te);
        d["fused"] = Fuse(t.fusion, ie, te);
        return d;
      },
      py::arg("image"), py::arg("text"), py::arg("labels"), py::arg("strategy") = "linear_addition",
      py::arg("loss") = "bce_multilabel", py::arg("lr0") = 1e-3, py::arg("epochs") = 40,
      py::arg("batch_size") = 128, py::arg("seed") = 0, py::arg("d_alg") = 512, py::arg("d_k") = 512,
      py::arg("image_eval") = py::none(), py::arg("text_eval") = py::none(),
      "Trains a fusion strategy; returns the loss log, scores and fused representation of the eval "
      "features (training features when none are given).");

  // Captions.
  m.def(
      "augment_caption",
      [](const std::string& caption, const std::vector<int>& labels, const std::string& catalog_path) {
        DatasetRecord r;
        r.caption = caption;
        r.labels = labels;
        return AugmentCaption(r, ReadCatalog(catalog_path));
      },
      py::arg("caption"), py::arg("labels"), py::arg("catalog_path"));

  // Search and configs.
  m.def("run_search", &RunSearch, py::arg("config_path"), py::arg("overrides") = std::vector<std::string>{},
        py::arg("exhaustive") = false, "Runs a search and returns the report as a JSON string.");
  m.def(
      "resolve_config",
      [](const std::string& path, const std::vector<std::string>& overrides) {
        return RunConfigJson(LoadRunConfig(path, overrides));
      },
      py::arg("config_path"), py::arg("overrides") = std::vector<std::string>{});
  m.def("rescale_blocks", &RescaleBlocks, py::arg("blocks"), py::arg("reference_depth"), py::arg("depth"));

  // Feature caches.
  m.def(
      "read_feature_cache",
      [](const std::string& path) {
        const FeatureMatrix f = ReadFeatureCache(path);
        return py::make_tuple(f.data, std::string(ModalityName(f.modality)), f.t, f.b);
      },
      py::arg("path"), "Returns (features, modality, t, b).");
  m.def(
      "write_feature_cache",
      [](const std::string& path, const MatrixF& data, const std::string& modality, int t, int b) {
        FeatureMatrix f;
        f.data = data;
        f.modality = ParseModality(modality);
        f.t = t;
        f.b = b;
        WriteFeatureCache(path, f);
      },
      py::arg("path"), py::arg("features"), py::arg("modality"), py::arg("t"), py::arg("b"));
}
