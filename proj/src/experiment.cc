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

#include "dfprobe/experiment.h"

#include <algorithm>

namespace dfprobe {

namespace {

std::unique_ptr<DatasetSource> MakeData(const RunConfig& c) {
  if (c.data.train_path.empty()) {
    return std::make_unique<SyntheticBenchmark>(SyntheticBenchmark::Generate(MakeSyntheticSpec(c)));
  }
  auto train = ReadRecords(c.data.train_path);
  auto val = ReadRecords(c.data.val_path);
  int classes = 0;
  if (!c.data.catalog_path.empty()) {
    classes = ReadCatalog(c.data.catalog_path).size();
  } else {
    for (const auto* split : {&train, &val}) {
      for (const auto& r : *split) {
        for (int l : r.labels) classes = std::max(classes, l + 1);
      }
    }
  }
  RecordPreprocessing prep{c.text_backbone.seq_len, c.text_backbone.vocab_size,
                           c.image_backbone.patch_input_dim};
  return std::make_unique<RecordDataset>(std::move(train), std::move(val), classes, prep);
}

}  // namespace

Workspace::Workspace(const RunConfig& config)
    : config_(config),
      schedule_(MakeSchedule(config)),
      data_(MakeData(config)),
      image_(config.image_backbone),
      text_(config.text_backbone),
      image_space_(ResolveSpace(config.image_grid, config.image_backbone.depth)),
      text_space_(ResolveSpace(config.text_grid, config.text_backbone.depth)) {
  synthetic_ = dynamic_cast<const SyntheticBenchmark*>(data_.get());
}

const Backbone& Workspace::backbone(Modality m) const {
  if (m == Modality::kFused) throw InvalidArgument("no backbone for fused modality");
  return m == Modality::kImage ? image_ : text_;
}

const SearchSpace& Workspace::space(Modality m) const {
  if (m == Modality::kFused) throw InvalidArgument("no search space for fused modality");
  return m == Modality::kImage ? image_space_ : text_space_;
}

std::unique_ptr<ProbeEvaluator> Workspace::MakeEvaluator() const {
  return MakeEvaluator(MakeEvaluatorOptions(config_));
}

std::unique_ptr<ProbeEvaluator> Workspace::MakeEvaluator(const ProbeEvaluatorOptions& options) const {
  return std::make_unique<ProbeEvaluator>(*data_, image_, text_, schedule_, image_space_,
                                          text_space_, options);
}

const StrategyOutcome& FusionComparison::outcome(FusionStrategy s) const {
  for (const auto& o : fused) {
    if (o.strategy == s) return o;
  }
  throw InvalidArgument("strategy '" + std::string(FusionStrategyName(s)) + "' was not run");
}

std::pair<std::vector<Eigen::Index>, std::vector<int>> SingleLabelRows(const MatrixD& labels) {
  std::pair<std::vector<Eigen::Index>, std::vector<int>> out;
  for (Eigen::Index i = 0; i < labels.rows(); ++i) {
    if (labels.row(i).sum() != 1.0) continue;
    Eigen::Index k = 0;
    labels.row(i).maxCoeff(&k);
    out.first.push_back(i);
    out.second.push_back(static_cast<int>(k));
  }
  return out;
}

FusionComparison CompareFusion(ProbeEvaluator& evaluator, const FusionPair& pair,
                               std::span<const FusionStrategy> strategies,
                               const MatrixD& train_labels, const MatrixD& val_labels,
                               FusionStrategy cluster_strategy) {
  const ProbeEvaluatorOptions& opt = evaluator.options();
  const auto img = evaluator.Features(pair.image);
  const auto txt = evaluator.Features(pair.text);

  FusionComparison out;
  out.pair = pair;
  auto unimodal = [&](const CellFeatures& f, EvalResult& result, LossLog& log) {
    const auto trained = TrainProbe(f.train.pooled.cast<float>(), train_labels, opt.loss, opt.train);
    result = Evaluate(PredictD(trained.model, f.val.pooled), val_labels, opt.threshold);
    log = trained.log;
  };
  unimodal(*img, out.image, out.image_log);
  unimodal(*txt, out.text, out.text_log);

  const auto [rows, classes] = SingleLabelRows(val_labels);
  auto select = [&rows = rows](const MatrixD& m) {
    MatrixD s(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) s.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
    return s;
  };

  for (FusionStrategy s : strategies) {
    const auto trained = TrainFused(img->train, txt->train, train_labels, s, opt.loss, opt.train, opt.dims);
    StrategyOutcome o;
    o.strategy = s;
    const MatrixD scores = PredictFused(trained, img->val, txt->val);
    o.result = Evaluate(scores, val_labels, opt.threshold);
    o.log = trained.log;
    if (s == cluster_strategy) {
      out.fused_scores = scores;
      out.cluster_samples = rows.size();
      out.clusters.emplace_back("image", ComputeClusterQuality(select(img->val.pooled), classes));
      out.clusters.emplace_back("text", ComputeClusterQuality(select(txt->val.pooled), classes));
      out.clusters.emplace_back(
          "fused", ComputeClusterQuality(select(Fuse(trained.fusion, img->val, txt->val)), classes));
    }
    out.fused.push_back(std::move(o));
  }
  return out;
}

NoiseComparison CompareNoiseModes(const Workspace& ws, const ConfigPoint& point, int repeats) {
  if (repeats < 2) throw InvalidArgument("noise comparison needs >= 2 repeats");
  NoiseComparison out;
  const ProbeEvaluatorOptions base = MakeEvaluatorOptions(ws.config());
  for (int r = 0; r < repeats; ++r) {
    for (NoiseMode mode : {NoiseMode::kDeterministic, NoiseMode::kStochastic}) {
      ProbeEvaluatorOptions opt = base;
      opt.noise_mode = mode;
      opt.noise_seed = base.noise_seed + static_cast<std::uint64_t>(r);
      opt.train.seed = base.train.seed + static_cast<std::uint64_t>(r);
      auto evaluator = ws.MakeEvaluator(opt);
      const double map = evaluator->EvaluateCells(std::span<const ConfigPoint>(&point, 1))[0].mAP;
      (mode == NoiseMode::kDeterministic ? out.deterministic : out.stochastic).push_back(map);
    }
  }
  out.test = PairedTTest(out.deterministic, out.stochastic);
  return out;
}

}  // namespace dfprobe
