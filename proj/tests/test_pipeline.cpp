#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "murmur/error.hpp"
#include "murmur/pipeline.hpp"
#include "test_util.hpp"

using namespace murmur;

namespace {

SynthCorpus small_corpus() {
  SynthCorpusOptions o;
  o.patients = 24;
  o.seed = 9;
  o.present_fraction = 0.4;
  o.unknown_fraction = 0.15;
  o.min_duration_s = 8;
  o.max_duration_s = 10;
  o.min_locations = 1;
  o.max_locations = 2;
  return synth_corpus(o);
}

struct Trained {
  SynthCorpus corpus = small_corpus();
  PipelineConfig config;
  std::vector<PatientFeatures> train, val, test;
  TrainOutcome outcome;

  Trained() {
    config.epochs = 2;
    config.mcd_passes = 4;
    const auto loader = corpus_loader(corpus);
    train = extract_patients(corpus.manifest.in_split(Split::Train), config, true, loader);
    val = extract_patients(corpus.manifest.in_split(Split::Validation), config, false, loader);
    test = extract_patients(corpus.manifest.in_split(Split::Test), config, false, loader);
    outcome = train_pipeline(train, val, config);
  }
};

const Trained& trained() {
  static const Trained t;
  return t;
}

}  // namespace

TEST_CASE("config json round trip and validation") {
  PipelineConfig c;
  c.n_fft = 256;
  c.psd_thr = 0.3;
  c.variant = nn::Variant::Heavy;
  c.entropy_mode = EntropyMode::MeanOfEntropies;
  c.vote_rule = VoteRule::Quotient;
  c.selective = false;
  c.seed = 123456789012345ULL;
  CHECK(config_from_json(to_json(c)) == c);
  CHECK(config_from_json("{}") == PipelineConfig{});
  CHECK(config_header(c).rfind("# config {", 0) == 0);

  CHECK_THROWS_AS(config_from_json("{\"bogus\": 1}"), Error);
  CHECK_THROWS_AS(config_from_json("{\"n_fft\": \"x\"}"), Error);
  CHECK_THROWS_AS(config_from_json("not json"), Error);
  for (auto mutate : std::vector<void (*)(PipelineConfig&)>{
           [](PipelineConfig& x) { x.n_fft = 100; }, [](PipelineConfig& x) { x.psd_thr = 1.5; },
           [](PipelineConfig& x) { x.min_keep = -1; }, [](PipelineConfig& x) { x.mcd_passes = 1; },
           [](PipelineConfig& x) { x.alpha = -0.1; }, [](PipelineConfig& x) { x.batch_size = 0; }}) {
    PipelineConfig x;
    mutate(x);
    CHECK_THROWS_AS(validate(x), Error);
  }

  TempDir dir("config");
  const auto path = dir.path / "c.json";
  std::ofstream(path) << to_json(c);
  CHECK(load_config(path) == c);
  const auto report = dir.path / "r.tsv";
  std::ofstream(report) << config_header(c) << "a\tb\n";
  CHECK(load_config(report) == c);
}

TEST_CASE("extract_location shapes and the quality gate") {
  PipelineConfig c;
  const auto w = synth_recording(MurmurLabel::Present, 10, 3);
  const auto f = extract_location(w, c, c.hop_s);
  CHECK(f.height == 33);
  CHECK(f.width == 124);
  CHECK(f.total_segments == 9);
  CHECK(f.maps.size() <= f.total_segments);
  CHECK(f.maps.size() >= 5);
  CHECK(f.maps.size() == f.start_s.size());
  for (const auto& m : f.maps) CHECK(m.size() == 33u * 124u);
  CHECK(std::is_sorted(f.start_s.begin(), f.start_s.end()));

  auto slow = resample_linear(w, 2000);
  const auto g = extract_location(slow, c, c.hop_s);
  CHECK(g.height == 33);
  CHECK(g.total_segments == 9);
}

TEST_CASE("oversampling multiplies Present segments") {
  const auto corpus = small_corpus();
  PipelineConfig c;
  const auto loader = corpus_loader(corpus);
  const auto train = corpus.manifest.in_split(Split::Train);
  const auto plain = extract_patients(train, c, false, loader);
  const auto over = extract_patients(train, c, true, loader);
  REQUIRE(plain.size() == over.size());
  for (std::size_t i = 0; i < plain.size(); ++i) {
    std::size_t a = 0, b = 0;
    for (const auto& l : plain[i].locations) a += l.total_segments;
    for (const auto& l : over[i].locations) b += l.total_segments;
    if (plain[i].label == MurmurLabel::Present) CHECK(b > 3 * a);
    else CHECK(b == a);
  }
  const auto fs = to_feature_set(plain);
  std::size_t known = 0;
  for (const auto& p : plain)
    if (p.label != MurmurLabel::Unknown)
      for (const auto& l : p.locations) known += l.maps.size();
  CHECK(fs.size() == known);
}

TEST_CASE("train and infer end to end") {
  const auto& t = trained();
  CHECK(t.outcome.train_segments > 0);
  CHECK(t.outcome.val_segments > 0);
  CHECK(t.outcome.fit.history.epochs.size() == 2);

  const auto results = infer(t.outcome.fit.network, t.test, t.config);
  CHECK(!results.empty());
  for (const auto& r : results) {
    CHECK(!r.locations.empty());
    for (const auto& l : r.locations) {
      CHECK(l.segments.size() == l.start_s.size());
      for (const auto& s : l.segments) {
        CHECK(s.n_passes == 4);
        CHECK(s.confidence >= 0);
        CHECK(s.confidence <= 1);
      }
      CHECK(l.plain.threshold_used == t.config.vote_thr);
    }
  }
  const auto again = infer(t.outcome.fit.network, t.test, t.config);
  CHECK(render_predictions(results, t.config) == render_predictions(again, t.config));

  const auto text = render_predictions(results, t.config);
  CHECK(text.find("patient_id\ttruth\tlabel\tlabel_plain\tlocations\n") != std::string::npos);
  CHECK(text.find("# metrics plain accuracy=") != std::string::npos);
  CHECK(text.find("# metrics selective accuracy=") != std::string::npos);

  auto plain_cfg = t.config;
  plain_cfg.selective = false;
  const auto plain_only = infer(t.outcome.fit.network, t.test, plain_cfg);
  for (const auto& r : plain_only) CHECK(r.selective.label == r.plain.label);
}

TEST_CASE("uq report sections") {
  const auto& t = trained();
  std::vector<PatientFeatures> all = t.test;
  all.insert(all.end(), t.val.begin(), t.val.end());
  const auto results = infer(t.outcome.fit.network, all, t.config);
  const auto report = render_uq_report(results, t.config);
  std::size_t last = 0;
  for (const char* section : {"# segments", "# threshold_sweep", "# confidence_histogram", "# confident_ratio",
                              "# mann_whitney"}) {
    const auto at = report.find(section);
    REQUIRE(at != std::string::npos);
    CHECK(at > last);
    last = at;
  }
  const auto s = summarize_uq(results, t.config);
  std::size_t unknown_recordings = 0;
  for (const auto& r : results)
    if (r.truth == MurmurLabel::Unknown) unknown_recordings += r.locations.size();
  CHECK(s.unknown_ratios.size() == unknown_recordings);
  CHECK(s.test_valid == (unknown_recordings > 0 && !s.known_ratios.empty()));
}

TEST_CASE("label agreement of the quantized network") {
  const auto& t = trained();
  const auto train_set = to_feature_set(t.train);
  const auto q = quantize_network(t.outcome.fit.network, train_set);
  const auto test_set = to_feature_set(t.test);
  CHECK(label_agreement(t.outcome.fit.network, q, test_set) >= 0.9);
}

TEST_CASE("cross validation runs every fold") {
  const auto corpus = small_corpus();
  PipelineConfig c;
  c.epochs = 1;
  std::vector<PatientRecord> known;
  for (const auto& p : corpus.manifest.entries)
    if (p.label != MurmurLabel::Unknown) known.push_back(p);
  const std::vector<int> n_ffts{128};
  const std::vector<double> thrs{0.45};
  const auto rows = cross_validate(known, c, n_ffts, thrs, 3, corpus_loader(corpus));
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].folds.size() == 3);
  CHECK(rows[0].accuracy.mean >= 0);
  CHECK(rows[0].accuracy.mean <= 1);
  const auto text = render_cv(rows, c);
  CHECK(text.rfind("# config ", 0) == 0);
  CHECK(text.find("128") != std::string::npos);

  const std::vector<int> bad{100};
  CHECK_THROWS_AS(cross_validate(known, c, bad, thrs, 3, corpus_loader(corpus)), Error);
}
