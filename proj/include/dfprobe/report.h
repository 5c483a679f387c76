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

#ifndef DFPROBE_REPORT_H_
#define DFPROBE_REPORT_H_

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dfprobe/dataio.h"
#include "dfprobe/metrics.h"
#include "dfprobe/probe.h"
#include "dfprobe/search.h"

namespace dfprobe {

// All emitters use "." as the decimal separator regardless of locale.

// "epoch,loss", epochs numbered from 1.
std::string LossCsv(const LossLog& log);

// "modality,timestep,block,metric,value"; one row per cell and metric, values
// as fractions. Optional metrics are emitted only when present.
std::string HeatmapCsv(std::span<const GridCell> cells);

// One row per (t, b): "timestep,block,mAP,CP,CR,CF1,OP,OR,OF1" in percent.
std::string GridTableCsv(std::span<const GridCell> cells);

// "mAP,CP,CR,CF1,OP,OR,OF1" rows in percent with two decimals. When any row
// has a non-empty name a leading "config" column is added.
std::string EvalCsv(std::span<const std::pair<std::string, EvalResult>> rows);

// "class,name,count,ap,f1" for per-class frequency/score charts. AP is left
// empty for classes without positives.
std::string PerClassCsv(const EvalResult& result, const ClassCatalog& catalog);

// "name,count,percentage"
std::string RareStatsCsv(std::span<const RareCategoryRow> rows);

// "lo,hi,count"
std::string LengthHistogramCsv(std::span<const LengthBucket> buckets);

std::string EvalResultJson(const EvalResult& r);
std::string PowersetJson(const PowersetReport& report);
std::string ClusterQualityJson(std::span<const std::pair<std::string, ClusterQuality>> rows);
std::string TTestJson(const TTestResult& r);

// Search report round trip. Per-class vectors are not serialized.
std::string SearchReportJson(const SearchReport& report);
SearchReport ParseSearchReport(const std::string& json);

// Heatmap rows re-read from disk for the report command.
std::vector<GridCell> ParseHeatmapCsv(const std::string& csv);

// Writes text to path, creating parent directories.
void WriteText(const std::string& path, const std::string& text);

}  // namespace dfprobe

#endif  // DFPROBE_REPORT_H_
