#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "tritcal/checkpoint.hpp"
#include "tritcal/error.hpp"

using namespace tritcal;

namespace {

Checkpoint sample_checkpoint() {
  Rng rng = make_rng(21);
  Checkpoint c;
  c.params = init_he(LayerSpec{{12, 9, 7, 4}}, rng);
  std::normal_distribution<double> n;
  for (auto& layer : c.params.layers) {
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = n(rng) * 1e-3;
  }
  c.adam = AdamState::zeros_like(c.params);
  auto g = Gradients::zeros(c.params.spec());
  for (auto& layer : g.layers) layer.weights.setConstant(0.37);
  adam_step(c.params, g, c.adam, AdamConfig{});
  adam_step(c.params, g, c.adam, AdamConfig{});
  c.scaling = {{0.0, 0.0, 1.0 / 3.0, 0.1}, {7.0, 7.0, 8.0 + 1e-13, 7.1}};
  c.kick = {7.0 * 8.0 / 52.0, 0.1};
  c.provenance = Provenance::experimental;
  c.dataset_hash = 0x0123456789abcdefULL;
  return c;
}

ErrorCategory parse_category(const std::string& text) {
  try {
    parse_checkpoint(text);
  } catch (const Error& e) {
    return e.category();
  }
  ADD_FAILURE() << "accepted corrupted checkpoint";
  return ErrorCategory::io;
}

// Recompute the trailing checksum so a structural edit is not caught by it.
std::string reseal(std::string body) {
  const auto at = body.rfind("checksum ");
  body.erase(at);
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a(body)));
  return body + "checksum " + hex + "\n";
}

}  // namespace

TEST(Checkpoint, LosslessRoundTrip) {
  const auto c = sample_checkpoint();
  const auto back = parse_checkpoint(serialize_checkpoint(c));
  ASSERT_EQ(back.params.layers.size(), c.params.layers.size());
  for (std::size_t l = 0; l < c.params.layers.size(); ++l) {
    EXPECT_EQ(back.params.layers[l].weights, c.params.layers[l].weights);
    EXPECT_EQ(back.params.layers[l].bias, c.params.layers[l].bias);
    EXPECT_EQ(back.adam.first_moment.layers[l].weights, c.adam.first_moment.layers[l].weights);
    EXPECT_EQ(back.adam.second_moment.layers[l].bias, c.adam.second_moment.layers[l].bias);
  }
  EXPECT_EQ(back.adam.step, 2u);
  EXPECT_EQ(back.scaling, c.scaling);
  EXPECT_EQ(back.kick, c.kick);
  EXPECT_EQ(back.provenance, c.provenance);
  EXPECT_EQ(back.dataset_hash, c.dataset_hash);
  EXPECT_EQ(serialize_checkpoint(back), serialize_checkpoint(c));

  Rng rng = make_rng(1);
  std::uniform_real_distribution<double> u;
  Eigen::VectorXd x(12);
  for (auto& v : x) v = u(rng);
  EXPECT_EQ(forward(back.params, x), forward(c.params, x));
}

TEST(Checkpoint, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "tritcal_roundtrip.ckpt";
  const auto c = sample_checkpoint();
  save_checkpoint(c, path);
  const auto back = load_checkpoint(path);
  std::filesystem::remove(path);
  EXPECT_EQ(serialize_checkpoint(back), serialize_checkpoint(c));
}

TEST(Checkpoint, SelfDescribingLayout) {
  const auto text = serialize_checkpoint(sample_checkpoint());
  EXPECT_EQ(text.rfind(std::string(kCheckpointMagic), 0), 0u);
  EXPECT_NE(text.find("\nversion 1\n"), std::string::npos);
  EXPECT_NE(text.find("\nlayers 12 9 7 4\n"), std::string::npos);
  EXPECT_LT(text.find("\nkick "), text.find("\nparam "));
  EXPECT_LT(text.find("\nparam "), text.find("\nadam_step "));
  EXPECT_LT(text.find("\nadam_step "), text.find("\nchecksum "));
}

TEST(Checkpoint, TruncatedFileRejected) {
  const auto text = serialize_checkpoint(sample_checkpoint());
  for (const double keep : {0.2, 0.5, 0.9, 0.999}) {
    EXPECT_EQ(parse_category(text.substr(0, static_cast<std::size_t>(keep * text.size()))), ErrorCategory::checksum);
  }
  EXPECT_EQ(parse_category(""), ErrorCategory::checksum);
}

TEST(Checkpoint, FlippedDigitRejected) {
  auto text = serialize_checkpoint(sample_checkpoint());
  const auto at = text.find("param 0 weights");
  auto digit = text.find_first_of("123456789", at + 20);
  text[digit] = text[digit] == '9' ? '8' : static_cast<char>(text[digit] + 1);
  EXPECT_EQ(parse_category(text), ErrorCategory::checksum);
}

TEST(Checkpoint, VersionMismatchRejected) {
  auto text = serialize_checkpoint(sample_checkpoint());
  text.replace(text.find("version 1"), 9, "version 7");
  EXPECT_EQ(parse_category(reseal(text)), ErrorCategory::version_mismatch);
}

TEST(Checkpoint, StructuralDamageRejected) {
  auto text = serialize_checkpoint(sample_checkpoint());
  text.replace(text.find("layers 12 9 7 4"), 15, "layers 12 9 8 4");
  EXPECT_EQ(parse_category(reseal(text)), ErrorCategory::parse);
}

TEST(Checkpoint, MissingFileIsIoError) {
  try {
    load_checkpoint("/nonexistent/dir/model.ckpt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::io);
  }
}

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);
}
