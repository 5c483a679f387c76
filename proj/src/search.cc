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

#include "dfprobe/search.h"

#include <algorithm>
#include <set>
#include <thread>

namespace dfprobe {

void SearchSpace::Validate(int depth, int steps) const {
  if (timesteps.empty() || blocks.empty()) {
    throw InvalidArgument("search space lists must be non-empty");
  }
  if (!std::is_sorted(timesteps.begin(), timesteps.end(), std::less_equal<>()) ||
      std::adjacent_find(timesteps.begin(), timesteps.end()) != timesteps.end()) {
    throw InvalidArgument("candidate timesteps must be strictly increasing");
  }
  if (std::adjacent_find(blocks.begin(), blocks.end(),
                         [](int a, int b) { return a >= b; }) != blocks.end()) {
    throw InvalidArgument("candidate blocks must be strictly increasing");
  }
  if (timesteps.front() < 0 || timesteps.back() > steps) {
    throw InvalidArgument("candidate timestep outside the schedule");
  }
  if (blocks.front() < 1 || blocks.back() > depth) {
    throw InvalidArgument("candidate block outside the backbone depth");
  }
}

ConfigPoint MakePoint(Modality modality, const SearchSpace& space, int t_index,
                      int b_index) {
  if (t_index < 0 || b_index < 0 || t_index >= static_cast<int>(space.timesteps.size()) ||
      b_index >= static_cast<int>(space.blocks.size())) {
    throw Error(ErrorKind::kInvalidArgument, "grid index out of range");
  }
  ConfigPoint p;
  p.modality = modality;
  p.t_index = t_index;
  p.b_index = b_index;
  p.t = space.timesteps[t_index];
  p.b = space.blocks[b_index];
  return p;
}

EvalCounts Evaluator::counts() const {
  return {image_.load(), text_.load(), fusion_.load()};
}

void Evaluator::CountCell(Modality modality) {
  (modality == Modality::kImage ? image_ : text_).fetch_add(1);
}

void Evaluator::CountPair() { fusion_.fetch_add(1); }

UnimodalResult UnimodalGrid(Modality modality, const SearchSpace& space,
                            Evaluator& evaluator) {
  std::vector<ConfigPoint> points;
  for (std::size_t t = 0; t < space.timesteps.size(); ++t) {
    for (std::size_t b = 0; b < space.blocks.size(); ++b) {
      points.push_back(MakePoint(modality, space, static_cast<int>(t),
                                 static_cast<int>(b)));
    }
  }
  const auto results = evaluator.EvaluateCells(points);
  UnimodalResult out;
  std::size_t best = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    out.grid.push_back({points[i], results[i]});
    if (results[i].mAP > results[best].mAP) best = i;
  }
  out.best = points[best];
  return out;
}

std::vector<ConfigPoint> Neighborhood(const ConfigPoint& opt,
                                      const SearchSpace& space, int radius) {
  if (radius < 0) throw InvalidArgument("neighborhood radius must be >= 0");
  const int nt = static_cast<int>(space.timesteps.size());
  const int nb = static_cast<int>(space.blocks.size());
  if (opt.t_index < 0 || opt.t_index >= nt || opt.b_index < 0 || opt.b_index >= nb) {
    throw InvalidArgument("neighborhood centre outside the search space");
  }
  std::vector<ConfigPoint> out;
  for (int t = std::max(0, opt.t_index - radius);
       t <= std::min(nt - 1, opt.t_index + radius); ++t) {
    for (int b = std::max(0, opt.b_index - radius);
         b <= std::min(nb - 1, opt.b_index + radius); ++b) {
      out.push_back(MakePoint(opt.modality, space, t, b));
    }
  }
  return out;
}

std::vector<FusionPair> PairProduct(std::span<const ConfigPoint> image,
                                    std::span<const ConfigPoint> text) {
  std::vector<FusionPair> out;
  out.reserve(image.size() * text.size());
  for (const auto& i : image) {
    for (const auto& t : text) out.push_back({i, t});
  }
  return out;
}

std::size_t BestCandidate(std::span<const FusionCandidate> candidates) {
  if (candidates.empty()) throw InvalidArgument("no fusion candidates");
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (candidates[i].result.mAP > candidates[best].result.mAP) best = i;
  }
  return best;
}

namespace {

void EvaluateCandidates(SearchReport& report, Evaluator& evaluator) {
  const auto results = evaluator.EvaluatePairs(report.neighborhood);
  for (std::size_t i = 0; i < results.size(); ++i) {
    report.fusion_results.push_back({report.neighborhood[i], results[i]});
  }
  report.winner = report.fusion_results[BestCandidate(report.fusion_results)];
}

EvalCounts Delta(const EvalCounts& after, const EvalCounts& before) {
  return {after.image - before.image, after.text - before.text,
          after.fusion - before.fusion};
}

}  // namespace

SearchReport HeuristicSearch(const SearchSpace& image_space,
                             const SearchSpace& text_space, Evaluator& evaluator,
                             int radius) {
  const EvalCounts before = evaluator.counts();
  SearchReport report;
  report.exhaustive = false;
  report.radius = radius;
  report.strategy = evaluator.strategy_name();

  auto image = UnimodalGrid(Modality::kImage, image_space, evaluator);
  auto text = UnimodalGrid(Modality::kText, text_space, evaluator);
  report.image_grid = std::move(image.grid);
  report.text_grid = std::move(text.grid);
  report.image_optimum = image.best;
  report.text_optimum = text.best;

  const auto image_near = Neighborhood(image.best, image_space, radius);
  const auto text_near = Neighborhood(text.best, text_space, radius);
  report.neighborhood = PairProduct(image_near, text_near);
  EvaluateCandidates(report, evaluator);
  report.counts = Delta(evaluator.counts(), before);
  return report;
}

SearchReport ExhaustiveSearch(const SearchSpace& image_space,
                              const SearchSpace& text_space, Evaluator& evaluator,
                              std::size_t max_pairs) {
  const std::size_t pairs = image_space.size() * text_space.size();
  if (pairs > max_pairs) {
    throw Error(ErrorKind::kBudget, "exhaustive search needs " + std::to_string(pairs) +
                                        " pair evaluations, budget is " +
                                        std::to_string(max_pairs));
  }
  const EvalCounts before = evaluator.counts();
  SearchReport report;
  report.exhaustive = true;
  report.radius = -1;
  report.strategy = evaluator.strategy_name();
  std::vector<ConfigPoint> image_all;
  std::vector<ConfigPoint> text_all;
  for (std::size_t t = 0; t < image_space.timesteps.size(); ++t)
    for (std::size_t b = 0; b < image_space.blocks.size(); ++b)
      image_all.push_back(MakePoint(Modality::kImage, image_space, static_cast<int>(t),
                                    static_cast<int>(b)));
  for (std::size_t t = 0; t < text_space.timesteps.size(); ++t)
    for (std::size_t b = 0; b < text_space.blocks.size(); ++b)
      text_all.push_back(MakePoint(Modality::kText, text_space, static_cast<int>(t),
                                   static_cast<int>(b)));
  report.neighborhood = PairProduct(image_all, text_all);
  EvaluateCandidates(report, evaluator);
  report.image_optimum = report.winner.pair.image;
  report.text_optimum = report.winner.pair.text;
  report.counts = Delta(evaluator.counts(), before);
  return report;
}

ProbeEvaluator::ProbeEvaluator(const DatasetSource& data,
                               const Backbone& image_backbone,
                               const Backbone& text_backbone,
                               const NoiseSchedule& schedule,
                               const SearchSpace& image_space,
                               const SearchSpace& text_space,
                               ProbeEvaluatorOptions options)
    : data_(data),
      image_backbone_(image_backbone),
      text_backbone_(text_backbone),
      schedule_(schedule),
      image_space_(image_space),
      text_space_(text_space),
      options_(std::move(options)),
      train_labels_(data.Labels(Split::kTrain)),
      val_labels_(data.Labels(Split::kVal)) {
  if (image_backbone.config().modality != Modality::kImage ||
      text_backbone.config().modality != Modality::kText) {
    throw InvalidArgument("backbones must be (image, text)");
  }
  image_space_.Validate(image_backbone.config().depth, schedule.steps());
  text_space_.Validate(text_backbone.config().depth, schedule.steps());
  options_.train.Validate();
}

std::string ProbeEvaluator::strategy_name() const {
  return std::string(FusionStrategyName(options_.strategy));
}

const Backbone& ProbeEvaluator::BackboneFor(Modality m) const {
  return m == Modality::kImage ? image_backbone_ : text_backbone_;
}

template <typename Fn>
void ProbeEvaluator::RunParallel(std::size_t count, Fn&& fn) const {
  std::size_t workers = options_.threads > 0
                            ? static_cast<std::size_t>(options_.threads)
                            : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

std::shared_ptr<const CellFeatures> ProbeEvaluator::Features(const ConfigPoint& point) {
  Prepare(std::span<const ConfigPoint>(&point, 1));
  std::lock_guard lock(mu_);
  return features_.at({static_cast<int>(point.modality), point.t_index, point.b_index});
}

void ProbeEvaluator::Prepare(std::span<const ConfigPoint> points) {
  std::vector<ConfigPoint> missing;
  {
    std::lock_guard lock(mu_);
    std::set<std::tuple<int, int, int>> seen;
    for (const auto& p : points) {
      const std::tuple key{static_cast<int>(p.modality), p.t_index, p.b_index};
      if (!features_.contains(key) && seen.insert(key).second) missing.push_back(p);
    }
  }
  const bool need_tokens = options_.strategy == FusionStrategy::kCrossAttention;
  // Cells whose inputs coincide at the same timestep share one forward pass
  // up to their deepest block.
  std::map<std::tuple<int, int, std::uint64_t>, std::vector<ConfigPoint>> groups;
  for (const auto& p : missing) {
    const std::uint64_t input = data_.InputKey(p.modality, p.t_index, p.b_index);
    groups[{static_cast<int>(p.modality), p.t, input}].push_back(p);
  }
  std::vector<std::vector<ConfigPoint>> work;
  for (auto& [key, members] : groups) work.push_back(std::move(members));

  RunParallel(work.size(), [&](std::size_t g) {
    const auto& members = work[g];
    const ConfigPoint& first = members.front();
    const Backbone& backbone = BackboneFor(first.modality);
    int deepest = 0;
    for (const auto& p : members) deepest = std::max(deepest, p.b);
    ExtractRequest req{first.t, deepest, options_.noise_mode, options_.noise_seed};

    std::map<int, CellFeatures> built;
    for (Split split : {Split::kTrain, Split::kVal}) {
      const InputBatch batch =
          data_.Inputs(first.modality, split, first.t_index, first.b_index);
      if (need_tokens) {
        for (const auto& p : members) {
          req.block = p.b;
          const TokenFeatures tokens = backbone.ExtractTokens(batch, req, schedule_);
          ModalityView view = MakeView(tokens.MeanPool(), &tokens);
          (split == Split::kTrain ? built[p.b].train : built[p.b].val) = std::move(view);
        }
      } else {
        const auto all = backbone.ExtractAllBlocks(batch, req, schedule_);
        for (const auto& p : members) {
          ModalityView view = MakeView(all[static_cast<std::size_t>(p.b - 1)]);
          (split == Split::kTrain ? built[p.b].train : built[p.b].val) = std::move(view);
        }
      }
    }
    std::lock_guard lock(mu_);
    for (const auto& p : members) {
      features_[{static_cast<int>(p.modality), p.t_index, p.b_index}] =
          std::make_shared<const CellFeatures>(built.at(p.b));
    }
  });
}

std::vector<EvalResult> ProbeEvaluator::EvaluateCells(std::span<const ConfigPoint> points) {
  Prepare(points);
  std::vector<EvalResult> out(points.size());
  std::vector<std::size_t> todo;
  {
    std::lock_guard lock(mu_);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& p = points[i];
      auto it = cell_results_.find({static_cast<int>(p.modality), p.t_index, p.b_index});
      if (it != cell_results_.end()) {
        out[i] = it->second;
      } else {
        todo.push_back(i);
      }
    }
  }
  RunParallel(todo.size(), [&](std::size_t j) {
    const ConfigPoint& p = points[todo[j]];
    const auto feats = Features(p);
    const auto trained = TrainProbe(feats->train.pooled.cast<float>(), train_labels_,
                                    options_.loss, options_.train);
    const MatrixD scores = PredictD(trained.model, feats->val.pooled);
    EvalResult r = Evaluate(scores, val_labels_, options_.threshold);
    CountCell(p.modality);
    std::lock_guard lock(mu_);
    cell_results_[{static_cast<int>(p.modality), p.t_index, p.b_index}] = r;
    out[todo[j]] = std::move(r);
  });
  return out;
}

std::vector<EvalResult> ProbeEvaluator::EvaluatePairs(std::span<const FusionPair> pairs) {
  std::vector<ConfigPoint> cells;
  for (const auto& p : pairs) {
    cells.push_back(p.image);
    cells.push_back(p.text);
  }
  Prepare(cells);
  std::vector<EvalResult> out(pairs.size());
  RunParallel(pairs.size(), [&](std::size_t i) {
    const auto img = Features(pairs[i].image);
    const auto txt = Features(pairs[i].text);
    const auto trained = TrainFused(img->train, txt->train, train_labels_,
                                    options_.strategy, options_.loss, options_.train,
                                    options_.dims);
    const MatrixD scores = PredictFused(trained, img->val, txt->val);
    out[i] = Evaluate(scores, val_labels_, options_.threshold);
    CountPair();
  });
  return out;
}

}  // namespace dfprobe
