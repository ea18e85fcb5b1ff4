#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>
#include <unordered_set>

#include "llmcb/llm/cache.hpp"
#include "llmcb/llm/embedder.hpp"
#include "llmcb/llm/http_backend.hpp"
#include "llmcb/llm/llm_policy.hpp"
#include "llmcb/llm/prompts.hpp"
#include "llmcb/llm/similarity.hpp"
#include "llmcb/llm/synthetic_backend.hpp"

using namespace llmcb;
using namespace llmcb::llm;

namespace {

Vector unit_vec(Eigen::Index d, Rng& rng) {
  std::normal_distribution<double> n;
  Vector v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = n(rng);
  return v / v.norm();
}

std::shared_ptr<const ActionSpace> random_space(std::size_t n, Eigen::Index d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Action> acts;
  for (std::size_t i = 0; i < n; ++i) acts.push_back({static_cast<ActionId>(i), "action " + std::to_string(i), unit_vec(d, rng)});
  return std::make_shared<const ActionSpace>(std::move(acts));
}

/// Context id c has correct action c mod |A|.
AnswerKey modular_key(std::size_t n) {
  return [n](const Context& c) { return std::vector<ActionId>{static_cast<ActionId>(c.id % static_cast<int>(n))}; };
}

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "llmcb_test_llm";
  std::filesystem::create_directories(dir);
  auto p = dir / name;
  std::filesystem::remove(p);
  return p;
}

}  // namespace

TEST(Cosine, BasicIdentities) {
  Vector u(3), v(3);
  u << 1, 2, 3;
  v << 0, 0, 0;
  EXPECT_NEAR(cosine_similarity(u, u), 1.0, 1e-15);
  EXPECT_NEAR(cosine_similarity(u, 2.0 * u), 1.0, 1e-15);
  EXPECT_NEAR(cosine_similarity(Vector::Unit(3, 0), Vector::Unit(3, 1)), 0.0, 1e-15);
  EXPECT_THROW(cosine_similarity(u, v), ConfigError);
  EXPECT_THROW(cosine_similarity(u, Vector::Ones(2)), ConfigError);
}

TEST(MatchOutput, SelfMatchTieAndBruteForce) {
  const auto space = random_space(10, 5, 1);
  EXPECT_EQ(match_output((*space)[4].embedding, *space), 4);

  Matrix tied(3, 2);
  tied << 0, 1, 1, 0, 1, 0;
  Vector q(2);
  q << 1, 0;
  EXPECT_EQ(match_output(q, tied), 1);

  Rng rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const auto s = random_space(10, 4, 100 + trial);
    const Vector out = unit_vec(4, rng);
    ActionId best = 0;
    double best_sim = -2.0;
    for (std::size_t a = 0; a < s->size(); ++a) {
      const Vector& e = (*s)[a].embedding;
      const double sim = out.dot(e) / (out.norm() * e.norm());
      if (sim > best_sim) best_sim = sim, best = static_cast<ActionId>(a);
    }
    EXPECT_EQ(match_output(out, *s), best);
  }
}

TEST(BuildDistribution, NormalizesAndIsScaleInvariant) {
  GeneratorOutput two{{{"a", 0.6}, {"b", 0.2}}};
  const std::vector<ActionId> ids{3, 5};
  const auto d = build_distribution(two, ids);
  EXPECT_DOUBLE_EQ(d.pairs[0].second, 0.75);
  EXPECT_DOUBLE_EQ(d.pairs[1].second, 0.25);

  GeneratorOutput three{{{"a", 1}, {"b", 1}, {"c", 2}}};
  const std::vector<ActionId> ids3{0, 0, 1};
  const auto d3 = build_distribution(three, ids3);
  EXPECT_DOUBLE_EQ(d3.probability_of(0), 0.5);
  EXPECT_DOUBLE_EQ(d3.probability_of(1), 0.5);

  GeneratorOutput one{{{"a", 1e-300}}};
  const std::vector<ActionId> ids1{7};
  Rng rng(1);
  EXPECT_EQ(build_distribution(one, ids1).sample(rng), 7);

  Rng fuzz(3);
  for (int trial = 0; trial < 200; ++trial) {
    GeneratorOutput g;
    std::vector<ActionId> m;
    for (int i = 0; i < 1 + trial % 6; ++i) {
      g.entries.push_back({"x", 0.01 + uniform01(fuzz)});
      m.push_back(i);
    }
    const double c = std::exp(10.0 * (uniform01(fuzz) - 0.5));
    GeneratorOutput scaled = g;
    for (auto& e : scaled.entries) e.likelihood *= c;
    const auto a = build_distribution(g, m), b = build_distribution(scaled, m);
    double sum = 0.0;
    for (std::size_t i = 0; i < a.pairs.size(); ++i) {
      EXPECT_NEAR(a.pairs[i].second, b.pairs[i].second, 1e-12);
      sum += a.pairs[i].second;
      if (a.pairs.size() > 1)
        EXPECT_NEAR(a.pairs[i].second / a.pairs[0].second, g.entries[i].likelihood / g.entries[0].likelihood, 1e-12);
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
  const std::vector<ActionId> short_ids{1};
  EXPECT_THROW(build_distribution(two, short_ids), ConfigError);
}

TEST(HashingEmbedder, DeterministicNonZeroAndSimilarForSharedTrigrams) {
  HashingEmbedder h(64, 9);
  EXPECT_EQ(h.embed("hello world"), h.embed("hello world"));
  EXPECT_GT(h.embed("").norm(), 0.0);
  EXPECT_GT(cosine_similarity(h.embed("machine learning"), h.embed("machine learnings")),
            cosine_similarity(h.embed("machine learning"), h.embed("zebra crossing")));
  const auto space = random_space(5, 64, 3);
  const auto t = TableEmbedder::for_actions(*space);
  EXPECT_EQ(t.embed("action 3"), (*space)[3].embedding);
  EXPECT_EQ(t.embed("unknown").size(), 64);
}

TEST(Prompts, RenderFieldsAndBuiltins) {
  Context c;
  c.id = 12;
  c.text = "raw";
  c.fields = {{"title", "Mug"}, {"content", "Ceramic, 12oz"}};
  EXPECT_EQ(render_template("{text}#{id}", c), "raw#12");
  EXPECT_EQ(render_template(templates::item_tag().user, c),
            "Title: Mug\nContent: Ceramic, 12oz\nTask: Predict the associated label.");
  EXPECT_EQ(templates::item_tag_chat().system, "Predict the item tag based on the content and title.");
  EXPECT_THROW(render_template("{missing}", c), ConfigError);
  EXPECT_FALSE(templates::by_name("nope"));
}

TEST(SyntheticOracle, AccuracyExtremes) {
  const auto space = random_space(20, 8, 4);
  const auto confusions = confusion_order(*space);
  Rng rng(1);
  OracleParams right{1.0, 0, OracleErrorMode::Uniform, 0.9};
  OracleParams wrong{0.0, 0, OracleErrorMode::Confusable, 0.9};
  for (int i = 0; i < 200; ++i) {
    const std::vector<ActionId> c{static_cast<ActionId>(i % 20)};
    EXPECT_EQ(synthetic_generate(right, *space, c, confusions, rng, 1).entries[0].text, (*space)[c[0]].text);
    const auto out = synthetic_generate(wrong, *space, c, confusions, rng, 3);
    EXPECT_NE(out.entries[0].text, (*space)[c[0]].text);
    EXPECT_EQ(out.entries[0].text, (*space)[confusions[c[0]][0]].text);
    EXPECT_EQ(out.entries.size(), 3u);
    EXPECT_DOUBLE_EQ(out.entries[0].likelihood, 0.9);
    EXPECT_GT(out.entries[1].likelihood, out.entries[2].likelihood);
  }
}

TEST(SyntheticOracle, RankOneFrequencyMonteCarlo) {
  const auto space = random_space(10, 4, 5);
  Rng rng(8);
  OracleParams p{0.5, 0, OracleErrorMode::Uniform, 0.9};
  const int n = 100000;
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    const std::vector<ActionId> c{static_cast<ActionId>(i % 10)};
    hits += synthetic_generate(p, *space, c, {}, rng, 2).entries[0].text == (*space)[c[0]].text;
  }
  EXPECT_NEAR(hits / double(n), 0.5, 3 * std::sqrt(0.25 / n));
}

TEST(SyntheticOracle, BackendIsDeterministicPerRequest) {
  const auto space = random_space(10, 4, 5);
  SyntheticOracleBackend b(space, modular_key(10), {0.35, 77, OracleErrorMode::Confusable, 0.9});
  Context c;
  c.id = 3;
  const GenerationRequest req{"prompt", "", 2, &c};
  EXPECT_EQ(b.generate(req), b.generate(req));
  EXPECT_THROW(b.generate({"prompt", "", 1, nullptr}), GeneratorError);
}

TEST(LlmPolicy, PerfectOracleAlwaysCorrect) {
  const auto space = random_space(25, 16, 6);
  auto backend = std::make_shared<SyntheticOracleBackend>(space, modular_key(25), OracleParams{1.0, 1});
  auto embedder = std::make_shared<TableEmbedder>(TableEmbedder::for_actions(*space));
  LlmPolicy p(backend, embedder, space);
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    Context c;
    c.id = i;
    EXPECT_EQ(p.act(c, rng), i % 25);
  }
}

TEST(LlmPolicy, EmpiricalAccuracyMonteCarlo) {
  const auto space = random_space(50, 16, 7);
  auto backend = std::make_shared<SyntheticOracleBackend>(space, modular_key(50), OracleParams{0.35, 12});
  auto embedder = std::make_shared<TableEmbedder>(TableEmbedder::for_actions(*space));
  LlmPolicy p(backend, embedder, space);
  Rng rng(2);
  const int n = 100000;
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    Context c;
    c.id = i;
    const auto a = p.act(c, rng);
    ASSERT_TRUE(space->contains(a));
    hits += a == i % 50;
  }
  EXPECT_NEAR(hits / double(n), 0.35, 3 * std::sqrt(0.35 * 0.65 / n));
}

TEST(LlmPolicy, StationaryDistribution) {
  const auto space = random_space(12, 6, 8);
  auto backend = std::make_shared<SyntheticOracleBackend>(space, modular_key(12), OracleParams{0.5, 3});
  auto embedder = std::make_shared<TableEmbedder>(TableEmbedder::for_actions(*space));
  LlmPolicyOptions o;
  o.k = 3;
  LlmPolicy p(backend, embedder, space, o);
  Context c;
  c.id = 5;
  const auto first = p.distribution(c);
  for (int t = 0; t < 50; ++t) {
    const auto d = p.distribution(c);
    ASSERT_EQ(d.pairs.size(), first.pairs.size());
    for (std::size_t i = 0; i < d.pairs.size(); ++i) {
      EXPECT_EQ(d.pairs[i].first, first.pairs[i].first);
      EXPECT_EQ(d.pairs[i].second, first.pairs[i].second);
    }
  }
}

TEST(Cache, StoreLookupPersistAndSkipCorruptLines) {
  const auto path = temp_file("cache.jsonl");
  GenerationRequest req{"hello", "", 2, nullptr};
  const GeneratorOutput out{{{"a", 0.7}, {"b", 0.3}}};
  const auto key = cache_key("backend-x", req);
  {
    ResponseCache cache(path);
    EXPECT_FALSE(cache.lookup(key));
    cache.store(key, req, out);
    EXPECT_EQ(*cache.lookup(key), out);
  }
  {
    std::ofstream f(path, std::ios::app);
    f << "{not json\n";
    f << R"({"key_hash":"abc","prompt":"p","k":1,"entries":[{"text":"t","likelihood":-1}]})" << '\n';
  }
  ResponseCache reloaded(path);
  EXPECT_EQ(reloaded.size(), 1u);
  EXPECT_EQ(*reloaded.lookup(key), out);
  EXPECT_NE(cache_key("backend-x", {"hello", "", 1, nullptr}), key);
  EXPECT_NE(cache_key("backend-y", req), key);
}

TEST(Cache, NoKeyCollisionsOnFuzzCorpus) {
  Rng rng(99);
  std::unordered_set<std::string> keys;
  std::unordered_set<std::string> prompts;
  while (prompts.size() < 100000) {
    std::string s;
    const auto len = 1 + rng() % 24;
    for (std::size_t i = 0; i < len; ++i) s.push_back(static_cast<char>('a' + rng() % 26));
    if (prompts.insert(s).second) keys.insert(cache_key("b", {s, "", 1, nullptr}));
  }
  EXPECT_EQ(keys.size(), prompts.size());
}

TEST(Cache, ReplayReproducesRecordedRun) {
  const auto space = random_space(15, 8, 9);
  const auto path = temp_file("replay.jsonl");
  auto oracle = std::make_shared<SyntheticOracleBackend>(space, modular_key(15), OracleParams{0.4, 5});
  auto cache = std::make_shared<ResponseCache>(path);
  auto recording = std::make_shared<CachingBackend>(oracle, cache);
  auto embedder = std::make_shared<TableEmbedder>(TableEmbedder::for_actions(*space));
  LlmPolicyOptions o;
  o.k = 2;
  LlmPolicy rec(recording, embedder, space, o);
  std::vector<ActionId> first;
  for (int i = 0; i < 200; ++i) {
    Context c;
    c.id = i;
    Rng rng(mix_seed(1, i));
    first.push_back(rec.act(c, rng));
  }
  auto replay = std::make_shared<ReplayBackend>(std::make_shared<ResponseCache>(path), oracle->id());
  LlmPolicy rep(replay, embedder, space, o);
  for (int i = 0; i < 200; ++i) {
    Context c;
    c.id = i;
    Rng rng(mix_seed(1, i));
    EXPECT_EQ(rep.act(c, rng), first[static_cast<std::size_t>(i)]);
  }
  Context unseen;
  unseen.id = 5000;
  Rng rng(0);
  // A prompt never seen while recording.
  unseen.text = "never recorded";
  EXPECT_THROW(rep.act(unseen, rng), GeneratorError);
}

namespace {

struct MockServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> hits{0};
  int failures_before_success = 0;
  std::string last_body;
  std::string last_auth;
  std::mutex mutex;

  MockServer() {
    server.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const int n = ++hits;
      {
        std::lock_guard lock(mutex);
        last_body = req.body;
        last_auth = req.get_header_value("Authorization");
      }
      if (n <= failures_before_success) {
        res.status = 503;
        return;
      }
      const auto body = nlohmann::json::parse(req.body);
      nlohmann::json choices = nlohmann::json::array();
      for (int i = 0; i < body.at("n").get<int>(); ++i) {
        nlohmann::json choice{{"index", i}, {"message", {{"role", "assistant"}, {"content", "action " + std::to_string(i)}}}};
        if (i == 0) choice["logprobs"] = {{"content", {{{"token", "a"}, {"logprob", -0.1}}, {{"token", "b"}, {"logprob", -0.2}}}}};
        choices.push_back(choice);
      }
      res.set_content(nlohmann::json{{"choices", choices}}.dump(), "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~MockServer() {
    server.stop();
    thread.join();
  }
  ChatCompletionsOptions options() const {
    ChatCompletionsOptions o;
    o.base_url = "http://127.0.0.1:" + std::to_string(port);
    o.model = "test-model";
    o.token_env = "LLMCB_TEST_TOKEN";
    o.backoff_base = std::chrono::milliseconds(1);
    o.timeout = std::chrono::seconds(5);
    return o;
  }
};

}  // namespace

TEST(ChatBackend, RequestShapeAndLikelihoods) {
  ::setenv("LLMCB_TEST_TOKEN", "sekret", 1);
  MockServer mock;
  ChatCompletionsBackend b(mock.options());
  const auto out = b.generate({"user text", "system text", 2, nullptr});
  ASSERT_EQ(out.entries.size(), 2u);
  EXPECT_EQ(out.entries[0].text, "action 0");
  EXPECT_NEAR(out.entries[0].likelihood, std::exp(-0.3), 1e-12);
  EXPECT_EQ(out.entries[1].likelihood, 1.0);
  const auto body = nlohmann::json::parse(mock.last_body);
  EXPECT_EQ(body["model"], "test-model");
  EXPECT_EQ(body["n"], 2);
  EXPECT_EQ(body["logprobs"], true);
  ASSERT_EQ(body["messages"].size(), 2u);
  EXPECT_EQ(body["messages"][0]["role"], "system");
  EXPECT_EQ(body["messages"][1]["content"], "user text");
  EXPECT_EQ(mock.last_auth, "Bearer sekret");
  ::unsetenv("LLMCB_TEST_TOKEN");
}

TEST(ChatBackend, RetriesTwiceThenSucceeds) {
  MockServer mock;
  mock.failures_before_success = 2;
  ChatCompletionsBackend b(mock.options());
  EXPECT_NO_THROW(b.generate({"x", "", 1, nullptr}));
  EXPECT_EQ(mock.hits.load(), 3);
}

TEST(ChatBackend, GivesUpAfterTwoRetries) {
  MockServer mock;
  mock.failures_before_success = 3;
  ChatCompletionsBackend b(mock.options());
  EXPECT_THROW(b.generate({"x", "", 1, nullptr}), GeneratorError);
  EXPECT_EQ(mock.hits.load(), 3);
}

TEST(ChatBackend, UnreachableServerIsAGeneratorError) {
  ChatCompletionsOptions o;
  o.base_url = "http://127.0.0.1:1";
  o.model = "m";
  o.backoff_base = std::chrono::milliseconds(1);
  o.timeout = std::chrono::seconds(1);
  ChatCompletionsBackend b(o);
  EXPECT_THROW(b.generate({"x", "", 1, nullptr}), GeneratorError);
}
