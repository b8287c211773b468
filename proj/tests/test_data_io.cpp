// Copyright 2026 The ema-gestures Authors.
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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "gestures/data_io.hpp"
#include "gestures/factorization.hpp"
#include "gestures/objectives.hpp"
#include "gestures/synthetic.hpp"
#include "oracles.hpp"

using namespace gestures;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("gestures_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Corpus random_corpus(Index n, std::mt19937_64& rng) {
  Corpus c;
  std::normal_distribution<double> g(0.0, 1e3);
  for (Index i = 0; i < n; ++i) {
    Utterance u;
    u.id = "utt" + std::to_string(i);
    u.frames = Tensor({12, 5 + i});
    for (Index k = 0; k < u.frames.size(); ++k) u.frames[k] = g(rng) * std::pow(10.0, static_cast<double>(k % 7) - 3.0);
    c.push_back(std::move(u));
  }
  return c;
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const DataError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("ema reader accepts minimal files and rejects bad ones") {
  const fs::path dir = temp_dir("read");
  write_text(dir / "one.ema", "ema v1 channels=12 rate=200\n0 0 0 0 0 0 0 0 0 0 0 0\n");
  const Utterance u = read_ema(dir / "one.ema", "one");
  CHECK(u.length() == 1);
  CHECK(u.channels() == 12);
  CHECK(u.sample_rate == 200.0);

  write_text(dir / "eleven.ema", "ema v1 channels=12 rate=200\n0 0 0 0 0 0 0 0 0 0 0\n");
  const std::string msg = error_of([&] { read_ema(dir / "eleven.ema"); });
  CHECK(msg.find("eleven.ema") != std::string::npos);
  CHECK(msg.find(":2") != std::string::npos);

  write_text(dir / "nan.ema", "ema v1 channels=2 rate=200\n1 nan\n");
  CHECK(error_of([&] { read_ema(dir / "nan.ema"); }).find("non-finite") != std::string::npos);
  write_text(dir / "junk.ema", "ema v1 channels=2 rate=200\n1 x\n");
  CHECK_THROWS_AS(read_ema(dir / "junk.ema"), DataError);
  write_text(dir / "head.ema", "csv\n1 2\n");
  CHECK_THROWS_AS(read_ema(dir / "head.ema"), DataError);
  write_text(dir / "empty.ema", "ema v1 channels=2 rate=200\n");
  CHECK_THROWS_AS(read_ema(dir / "empty.ema"), DataError);
  CHECK_THROWS_AS(read_ema(dir / "missing.ema"), DataError);
}

TEST_CASE("corpus save and load round trip is bit exact") {
  std::mt19937_64 rng(1);
  Corpus corpus = random_corpus(6, rng);
  corpus[2].labels = PhonemeSequence{"p", "aa", "t"};
  for (Utterance& u : corpus)
    if (!u.labels) u.labels = PhonemeSequence{"s"};
  const fs::path dir = temp_dir("roundtrip");
  save_corpus(dir, corpus);
  const Corpus back = load_corpus(dir / "manifest.csv", dir / "labels.txt");
  REQUIRE(back.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(back[i].id == corpus[i].id);
    CHECK(back[i].frames.shape() == corpus[i].frames.shape());
    CHECK((back[i].frames.data().array() == corpus[i].frames.data().array()).all());
    CHECK(back[i].labels == corpus[i].labels);
  }
  const Corpus unlabeled = load_corpus(dir / "manifest.csv");
  CHECK_FALSE(unlabeled[0].labels.has_value());

  write_text(dir / "short_labels.txt", "utt0 a\n");
  CHECK(error_of([&] { load_corpus(dir / "manifest.csv", dir / "short_labels.txt"); }).find("utt1") !=
        std::string::npos);
  write_text(dir / "bad.csv", "id,path\nonly-one-field\n");
  CHECK_THROWS_AS(load_corpus(dir / "bad.csv"), DataError);
}

TEST_CASE("label file parsing") {
  const fs::path dir = temp_dir("labels");
  write_text(dir / "l.txt", "a1 p aa t\n\na2 s\n");
  const auto labels = read_labels(dir / "l.txt");
  REQUIRE(labels.size() == 2);
  CHECK(labels[0].first == "a1");
  CHECK(labels[0].second == PhonemeSequence{"p", "aa", "t"});
  CHECK(labels[1].second == PhonemeSequence{"s"});
}

TEST_CASE("normalization statistics and inverse") {
  std::mt19937_64 rng(2);
  const Corpus corpus = random_corpus(5, rng);
  const NormStats s = compute_norm_stats(corpus);
  const Corpus norm = normalize(corpus, s);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(12), sq = Eigen::VectorXd::Zero(12);
  double n = 0;
  for (const Utterance& u : norm) {
    sum += u.frames.matrix().rowwise().sum();
    sq += u.frames.matrix().array().square().matrix().rowwise().sum();
    n += static_cast<double>(u.length());
  }
  CHECK((sum / n).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(((sq / n).array().sqrt() - 1.0).abs().maxCoeff() < 1e-10);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Tensor back = denormalize(norm[i].frames, s);
    const double scale = corpus[i].frames.data().cwiseAbs().maxCoeff();
    CHECK((back.data() - corpus[i].frames.data()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, scale));
  }

  Corpus flat = corpus;
  for (Utterance& u : flat) u.frames.matrix().row(3).setConstant(2.0);
  CHECK_THROWS_AS(compute_norm_stats(flat), DataError);
  CHECK_THROWS_AS(normalize(Tensor({3, 4}), s), ShapeError);
}

TEST_CASE("held-out data is normalized with training statistics") {
  std::mt19937_64 rng(3);
  Corpus corpus = random_corpus(10, rng);
  for (std::size_t i = 5; i < 10; ++i) corpus[i].frames.data().array() += 500.0;
  const Split sp = split_corpus(corpus, 0.8, 0);
  const NormStats train = compute_norm_stats(sp.train);
  const NormStats own = compute_norm_stats(sp.test);
  CHECK((train.mean - own.mean).cwiseAbs().maxCoeff() > 1.0);
  const Tensor z = normalize(sp.test[0].frames, train);
  CHECK(z(0, 0) == doctest::Approx((sp.test[0].frames(0, 0) - train.mean[0]) / train.stddev[0]));
}

TEST_CASE("seeded split is a deterministic partition") {
  std::mt19937_64 rng(4);
  const Corpus corpus = random_corpus(10, rng);
  const Split a = split_corpus(corpus, 0.8, 7), b = split_corpus(corpus, 0.8, 7);
  CHECK(a.train.size() == 8);
  CHECK(a.test.size() == 2);
  std::set<std::string> ids;
  for (const auto& u : a.train) ids.insert(u.id);
  for (const auto& u : a.test) ids.insert(u.id);
  CHECK(ids.size() == 10);
  for (std::size_t i = 0; i < a.train.size(); ++i) CHECK(a.train[i].id == b.train[i].id);
  const Split c = split_corpus(corpus, 0.8, 8);
  bool differs = false;
  for (std::size_t i = 0; i < c.train.size(); ++i) differs |= c.train[i].id != a.train[i].id;
  CHECK(differs);
  CHECK_THROWS_AS(split_corpus(random_corpus(4, rng), 0.8, 0), DataError);

  // 1263 utterances -> 1010 / 253
  Corpus big(1263);
  for (std::size_t i = 0; i < big.size(); ++i) {
    big[i].id = std::to_string(i);
    big[i].frames = Tensor({1, 1});
  }
  const Split sb = split_corpus(big, 0.8, 0);
  CHECK(sb.train.size() == 1010);
  CHECK(sb.test.size() == 253);
}

TEST_CASE("synthetic corpus honours its construction") {
  SyntheticOptions o;
  o.utterances = 20;
  o.labels = true;
  const SyntheticCorpus s = generate_synthetic(o);
  REQUIRE(s.corpus.size() == 20);
  CHECK(s.truth.W.shape() == Shape{41, 12, 8});
  for (std::size_t i = 0; i < s.corpus.size(); ++i) {
    const Utterance& u = s.corpus[i];
    const Tensor& H = s.truth.H[i];
    CHECK(u.length() >= 400);
    CHECK(u.length() <= 800);
    CHECK(H.data().minCoeff() >= 0.0);
    CHECK(time_sparsity(H.matrix()) >= 0.92);
    CHECK(channel_sparsity(H.matrix()) >= 0.90);
    for (Index k = 0; k < H.size(); ++k)
      if (H[k] != 0.0) {
        CHECK(H[k] >= 0.5);
        CHECK(H[k] <= 2.0);
      }
    // refractory gap of at least half a gesture between onsets of one gesture
    for (Index d = 0; d < 8; ++d) {
      Index last = -1000;
      for (Index t = 0; t < H.dim(1); ++t)
        if (H(d, t) > 0.0) {
          CHECK(t - last >= 21);
          last = t;
        }
    }
    const Tensor clean = convolutive_synthesis(s.truth.W, H);
    CHECK((clean.data() - s.truth.clean[i].data()).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::VectorXd noise = u.frames.data() - clean.data();
    CHECK(std::sqrt(noise.squaredNorm() / static_cast<double>(noise.size())) == doctest::Approx(0.01).epsilon(0.1));
    // the oracle's relative error is exactly the noise floor
    CHECK(relative_error_percent(u.frames.matrix(), clean.matrix()) ==
          doctest::Approx(100.0 * noise.norm() / u.frames.data().norm()).epsilon(1e-12));
    // activation-order labels
    REQUIRE(u.labels.has_value());
    std::vector<std::pair<Index, Index>> onsets;
    for (Index t = 0; t < H.dim(1); ++t)
      for (Index d = 0; d < 8; ++d)
        if (H(d, t) > 0.0) onsets.emplace_back(t, d);
    REQUIRE(u.labels->size() == onsets.size());
    for (std::size_t k = 0; k < onsets.size(); ++k) CHECK((*u.labels)[k] == "g" + std::to_string(onsets[k].second));
  }
}

TEST_CASE("synthetic generation is seeded and noiseless data is exact") {
  SyntheticOptions o;
  o.utterances = 6;
  const SyntheticCorpus a = generate_synthetic(o), b = generate_synthetic(o);
  for (std::size_t i = 0; i < a.corpus.size(); ++i)
    CHECK((a.corpus[i].frames.data().array() == b.corpus[i].frames.data().array()).all());
  o.seed = 1;
  const SyntheticCorpus c = generate_synthetic(o);
  CHECK((a.truth.W.data() - c.truth.W.data()).cwiseAbs().maxCoeff() > 0.0);

  o.noise = 0.0;
  const SyntheticCorpus z = generate_synthetic(o);
  for (std::size_t i = 0; i < z.corpus.size(); ++i)
    CHECK(relative_error_percent(z.corpus[i].frames.matrix(),
                                 convolutive_synthesis(z.truth.W, z.truth.H[i]).matrix()) == 0.0);
  // dense onsets in short utterances cannot be sparse enough
  o.kernel = 3;
  o.mean_gap = 1.0;
  o.min_length = o.max_length = 4;
  CHECK_THROWS_AS(generate_synthetic(o), DataError);
  o = SyntheticOptions{};
  o.smoothing = 0.0;
  CHECK_THROWS_AS(generate_synthetic(o), std::invalid_argument);
}
