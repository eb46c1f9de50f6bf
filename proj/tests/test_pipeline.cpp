// Copyright 2026 The f0vc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "f0vc/error.hpp"
#include "f0vc/pipeline.hpp"
#include "f0vc/gradcheck.hpp"

using namespace f0vc;

namespace {

F0Track make_track(std::vector<double> f0, std::vector<Syllable> syl = {},
                   std::string attitude = "a") {
  F0Track t;
  t.voicing.resize(f0.size());
  for (std::size_t i = 0; i < f0.size(); ++i) t.voicing[i] = f0[i] > 0 ? 1 : 0;
  t.f0_hz = std::move(f0);
  if (syl.empty()) syl.push_back({0.0, static_cast<double>(t.f0_hz.size())});
  t.syllables = std::move(syl);
  t.attitude = std::move(attitude);
  t.utterance_id = "u1";
  t.speaker_id = "s1";
  return t;
}

std::filesystem::path temp_dir() {
  auto p = std::filesystem::temp_directory_path() / "f0vc_test_pipeline";
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("prepare constant track") {
  const ModelInput in = prepare(make_track(std::vector<double>(1000, 100.0)));
  CHECK(in.signal.size() == 4000);
  CHECK(in.valid_length == 1000);
  CHECK(in.mean_logf0 == doctest::Approx(std::log(100.0)).epsilon(1e-12));
  for (Index k = 0; k < 1000; ++k) CHECK(in.signal[k] == std::log(100.0));
  CHECK((in.signal.tail(3000) == 0.0).all());
  CHECK((in.voicing_mask.head(1000) == 1.0).all());
  CHECK((in.voicing_mask.tail(3000) == 0.0).all());
}

TEST_CASE("prepare interpolates interior gaps in log domain") {
  std::vector<double> f0(50, 100.0);
  for (int i = 0; i < 10; ++i) f0.push_back(0.0);
  for (int i = 0; i < 50; ++i) f0.push_back(200.0);
  const ModelInput in = prepare(make_track(f0));
  // frames 49 (last 100 Hz) .. 60 (first 200 Hz) form a straight line
  const double a = std::log(100.0), b = std::log(200.0);
  for (int k = 50; k < 60; ++k) {
    const double frac = (k - 49) / 11.0;
    CHECK(std::abs(in.signal[k] - (a + frac * (b - a))) <= 1e-12);
    CHECK(in.voicing_mask[k] == 0.0);
  }
  CHECK(in.mean_logf0 == doctest::Approx(0.5 * (a + b)).epsilon(1e-14));
}

TEST_CASE("prepare holds the edges and respects the length limit") {
  std::vector<double> f0(30, 0.0);
  for (int i = 0; i < 20; ++i) f0.push_back(150.0 + i);
  for (int i = 0; i < 30; ++i) f0.push_back(0.0);
  const ModelInput in = prepare(make_track(f0));
  CHECK((in.signal.head(30) == std::log(150.0)).all());
  CHECK((in.signal.segment(50, 30) == std::log(169.0)).all());

  const ModelInput full = prepare(make_track(std::vector<double>(4000, 220.0)));
  CHECK(full.valid_length == 4000);
  CHECK((full.signal == std::log(220.0)).all());

  CHECK_THROWS_AS(prepare(make_track(std::vector<double>(4001, 220.0))), PipelineError);
  CHECK_THROWS_AS(prepare(make_track(std::vector<double>(100, 0.0))), PipelineError);
}

TEST_CASE("prepare round trips voiced frames and is idempotent") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(80.0, 300.0);
  std::vector<double> f0(777);
  for (auto& v : f0) v = u(rng);
  for (int i = 100; i < 180; ++i) f0[i] = 0.0;
  for (int i = 500; i < 503; ++i) f0[i] = 0.0;
  const F0Track t = make_track(f0);
  const ModelInput in = prepare(t);
  for (Index k = 0; k < t.length(); ++k)
    if (t.voicing[k]) CHECK(std::abs(std::exp(in.signal[k]) - f0[k]) <= 1e-9);

  std::vector<double> again(777, 0.0);
  for (Index k = 0; k < 777; ++k)
    if (t.voicing[k]) again[k] = std::exp(in.signal[k]);
  const ModelInput in2 = prepare(make_track(again));
  CHECK(((in2.signal - in.signal).abs() <= 1e-12).all());
}

TEST_CASE("align identical boundaries leaves the source unchanged") {
  std::vector<double> src(300), tgt(300, 120.0);
  for (int i = 0; i < 300; ++i) src[i] = i % 17 == 0 ? 0.0 : 100.0 + i;
  const std::vector<Syllable> syl{{10, 120}, {130, 290}};
  ParallelPair pair{make_track(src, syl, "a"), make_track(tgt, syl, "b")};
  const ParallelPair out = align_pair(pair);
  CHECK(out.source.f0_hz == pair.source.f0_hz);
  CHECK(out.source.voicing == pair.source.voicing);
  CHECK(out.target.f0_hz == pair.target.f0_hz);
}

TEST_CASE("align stretches a single syllable") {
  std::vector<double> src(100);
  for (int i = 0; i < 100; ++i) src[i] = 100.0 + i;
  ParallelPair pair{make_track(src, {{0, 100}}, "a"),
                    make_track(std::vector<double>(200, 150.0), {{0, 200}}, "b")};
  const ParallelPair out = align_pair(pair);
  REQUIRE(out.source.length() == 200);
  CHECK(out.source.syllables == out.target.syllables);
  for (int t = 0; t < 198; ++t) CHECK(std::abs(out.source.f0_hz[t] - (100.0 + t / 2.0)) <= 1e-9);
  CHECK(out.source.voiced_count() == 200);
}

TEST_CASE("align with two syllables matches the target duration") {
  // source syllables 100 + 200 ms; target 200 + 100 ms (x2 then x0.5)
  std::vector<double> src(300, 0.0);
  for (int i = 0; i < 300; ++i) src[i] = (i / 25) % 2 ? 130.0 : 0.0;
  ParallelPair pair{make_track(src, {{0, 100}, {100, 300}}, "a"),
                    make_track(std::vector<double>(300, 150.0), {{0, 200}, {200, 300}}, "b")};
  const ParallelPair out = align_pair(pair);
  CHECK(out.source.length() == out.target.length());
  const double seg1 = 2.0 * 100.0, seg2 = 0.5 * 200.0;
  CHECK(out.source.length() == static_cast<Index>(seg1 + seg2));
  // voiced frames: doubled in the first syllable, halved in the second
  const Index expect = 2 * 50 + 100 / 2;
  CHECK(std::abs(out.source.voiced_count() - expect) <= 2 * 3);
}

TEST_CASE("align errors") {
  const auto t = std::vector<double>(100, 100.0);
  ParallelPair bad{make_track(t, {{0, 50}, {50, 100}}, "a"), make_track(t, {{0, 100}}, "b")};
  CHECK_THROWS_AS(align_pair(bad), AlignmentError);
  ParallelPair same{make_track(t, {}, "a"), make_track(t, {}, "a")};
  CHECK_THROWS_AS(align_pair(same), ContractError);
  ParallelPair other = {make_track(t, {}, "a"), make_track(t, {}, "b")};
  other.target.utterance_id = "u2";
  CHECK_THROWS_AS(align_pair(other), ContractError);
}

TEST_CASE("slice windows") {
  std::mt19937_64 rng(6);
  const ad::Tensor plane = testing::random_tensor({32, 4000}, rng, false);
  CHECK(slice_windows(plane, 1024).size() == 2);
  const auto w = slice_windows(plane, 1025);
  REQUIRE(w.size() == 3);
  CHECK(w[2].width == 1);
  CHECK(w[2].block.shape() == ad::Shape{32, 512});
  CHECK(w[2].block.matrix().rightCols(511).isZero(0.0));
  CHECK_THROWS_AS(slice_windows(plane, 0), ContractError);
  CHECK_THROWS_AS(slice_windows(plane, -3), ContractError);

  for (Index valid : {1, 511, 512, 513, 1700, 4000}) {
    const ad::Tensor back = unslice(slice_windows(plane, valid));
    REQUIRE(back.shape() == ad::Shape{32, valid});
    CHECK(back.matrix() == plane.matrix().leftCols(valid));
  }
}

TEST_CASE("csv round trip and malformed input") {
  const auto dir = temp_dir();
  F0Track t = make_track({0.0, 101.5, 102.25, 0.0, 99.0}, {{1, 3}, {3, 5}});
  write_f0_csv((dir / "t.csv").string(), t);
  write_syllable_csv((dir / "t_syl.csv").string(), t.syllables);
  const F0Track r = read_f0_csv((dir / "t.csv").string());
  CHECK(r.f0_hz == t.f0_hz);
  CHECK(r.voicing == t.voicing);
  CHECK(read_syllable_csv((dir / "t_syl.csv").string()) == t.syllables);

  {
    std::ofstream bad(dir / "bad.csv");
    bad << "time_ms,f0_hz,voiced\n0,100,1\n1,abc,1\n";
  }
  try {
    read_f0_csv((dir / "bad.csv").string());
    FAIL("expected an error");
  } catch (const PipelineError& e) {
    CHECK(std::string(e.what()).find("bad.csv:3") != std::string::npos);
  }
  CHECK_THROWS_AS(read_f0_csv((dir / "missing.csv").string()), IoError);
}

TEST_CASE("resample to 1 ms") {
  const F0Track t = resample_to_1ms({0, 5, 10}, {100, 110, 0}, {1, 1, 0});
  REQUIRE(t.length() == 11);
  CHECK(t.f0_hz[0] == 100.0);
  CHECK(t.f0_hz[2] == doctest::Approx(104.0));
  CHECK(t.f0_hz[5] == 110.0);
  CHECK(t.voicing[7] == 1);
  CHECK(t.voicing[8] == 0);
  CHECK(t.f0_hz[10] == 0.0);
}
