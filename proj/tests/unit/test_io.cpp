#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "meshssm/error.hpp"
#include "meshssm/nn/archive.hpp"
#include "meshssm/nn/imnet.hpp"
#include "meshssm/nn/layers.hpp"
#include "meshssm/nn/mesh_autoencoder.hpp"
#include "meshssm/nn/spvae.hpp"
#include "meshssm/train/config.hpp"
#include "test_support.hpp"

using namespace meshssm;
using namespace meshssm::nn;
namespace mt = meshssm::testing;

namespace {

Archive sample_archive() {
  Archive a;
  a.put_tensor("weights", {2, 3}, std::vector<double>{1.5, -2.0, 3.25, 0.1, 1e-300, -0.0});
  a.put_tensor("scalar", {1}, std::vector<double>{42.0});
  a.put_text("note", "key = value\nsecond line");
  return a;
}

void rewrite_checksum(std::string& bytes) {
  const auto body = std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(bytes.data()),
                                                   bytes.size() - 8);
  const std::uint64_t h = fnv1a(body);
  std::memcpy(bytes.data() + bytes.size() - 8, &h, 8);
}

std::vector<double> flat_parameters(const std::vector<nd::Tensor>& params) {
  std::vector<double> out;
  for (const auto& p : params) out.insert(out.end(), p.data().begin(), p.data().end());
  return out;
}

}  // namespace

TEST(Archive, RoundTripIsBitExact) {
  const auto a = sample_archive();
  const auto b = Archive::deserialize(a.serialize());
  EXPECT_EQ(b.tensor("weights").shape, (nd::Shape{2, 3}));
  EXPECT_EQ(b.tensor("weights").values, a.tensor("weights").values);
  EXPECT_TRUE(std::signbit(b.tensor("weights").values[5]));
  EXPECT_EQ(b.text("note"), "key = value\nsecond line");
  EXPECT_EQ(b.serialize(), a.serialize());
  EXPECT_EQ(b.tensor_names(), (std::vector<std::string>{"scalar", "weights"}));
}

TEST(Archive, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "meshssm_archive_test.bin";
  sample_archive().save(path);
  EXPECT_EQ(Archive::load(path).serialize(), sample_archive().serialize());
  std::filesystem::remove(path);
  EXPECT_THROW(Archive::load(path), IoError);
}

TEST(Archive, CorruptionIsDetected) {
  const auto bytes = sample_archive().serialize();
  for (std::size_t pos : {std::size_t{20}, bytes.size() / 2, bytes.size() - 9}) {
    auto bad = bytes;
    bad[pos] ^= 0x10;
    EXPECT_THROW(Archive::deserialize(bad), ParseError) << "flipped byte " << pos;
  }
  EXPECT_THROW(Archive::deserialize(bytes.substr(0, bytes.size() - 3)), ParseError);
  EXPECT_THROW(Archive::deserialize("not an archive at all"), ParseError);
}

TEST(Archive, VersionMismatchIsValidationError) {
  auto bytes = sample_archive().serialize();
  const std::uint32_t future = Archive::kVersion + 1;
  std::memcpy(bytes.data() + 8, &future, 4);
  rewrite_checksum(bytes);
  EXPECT_THROW(Archive::deserialize(bytes), ValidationError);
}

TEST(Archive, ReadIntoChecksShape) {
  const auto a = sample_archive();
  auto t = nd::Tensor::zeros({2, 3}, true);
  a.read_into("weights", t);
  EXPECT_EQ(t[2], 3.25);
  auto wrong = nd::Tensor::zeros({3, 2});
  EXPECT_THROW(a.read_into("weights", wrong), ValidationError);
  EXPECT_THROW(a.tensor("missing"), ValidationError);
  EXPECT_FALSE(a.has("missing"));
}

TEST(Archive, NetworksRoundTripBitExactly) {
  MeshAEConfig mc;
  mc.vertex_count = 20;
  mc.k = 3;
  mc.edge_widths = {4, 6};
  mc.head_hidden = 8;
  mc.decoder_widths = {10};
  mc.latent_dim = 5;
  MeshAutoencoder mae(mc, 1);
  mae.edge_layers()[0].norm.running_mean.assign(4, 0.3);
  IMNetConfig ic;
  ic.latent_dim = 5;
  ic.hidden = {7, 7};
  ic.skip_layers = {2};
  IMNet imnet(ic, 2);
  SPVAEConfig sc;
  sc.points = 6;
  sc.latent_dim = 3;
  sc.encoder_widths = {9};
  sc.decoder_widths = {9};
  SPVAE vae(sc, 3);
  Archive a;
  mae.save(a, "m");
  imnet.save(a, "i");
  vae.save(a, "s");
  const auto b = Archive::deserialize(a.serialize());
  MeshAutoencoder mae2;
  mae2.load(b, "m");
  IMNet imnet2;
  imnet2.load(b, "i");
  SPVAE vae2;
  vae2.load(b, "s");
  EXPECT_EQ(flat_parameters(mae2.parameters()), flat_parameters(mae.parameters()));
  EXPECT_EQ(mae2.edge_layers()[0].norm.running_mean, mae.edge_layers()[0].norm.running_mean);
  EXPECT_EQ(mae2.config().edge_widths, mc.edge_widths);
  EXPECT_EQ(flat_parameters(imnet2.parameters()), flat_parameters(imnet.parameters()));
  EXPECT_EQ(imnet2.config().skip_layers, ic.skip_layers);
  EXPECT_EQ(flat_parameters(vae2.parameters()), flat_parameters(vae.parameters()));
  EXPECT_EQ(vae2.config().points, 6u);
}

TEST(ConfigHelpers, WidthsAndReals) {
  EXPECT_EQ(parse_widths("64, 64,128"), (std::vector<std::size_t>{64, 64, 128}));
  EXPECT_EQ(format_widths({1, 2, 3}), "1,2,3");
  EXPECT_THROW(parse_widths("64,-1"), ParseError);
  EXPECT_THROW(parse_widths("a"), ParseError);
  EXPECT_EQ(std::stod(format_real(0.1 + 0.2)), 0.1 + 0.2);
}

TEST(TrainConfigFile, DefaultsMatchTrainingRecipe) {
  const train::TrainConfig c;
  EXPECT_EQ(c.epochs, 1000u);
  EXPECT_EQ(c.batch_size, 10u);
  EXPECT_EQ(c.lr_mae, 0.01);
  EXPECT_EQ(c.lr_spvae, 0.0009);
  EXPECT_EQ(c.alpha_start, 0.01);
  EXPECT_EQ(c.alpha_end, 1.0);
  EXPECT_EQ(c.gamma, 0.01);
  EXPECT_EQ(c.prior_sample_count, 500u);
  EXPECT_EQ(c.latent_dim, 32u);
  EXPECT_EQ(c.spvae_latent_dim, 32u);
  EXPECT_NO_THROW(c.validate());
}

TEST(TrainConfigFile, ParsesKeyValueLines) {
  std::istringstream in("# training\nepochs = 40\nedge_widths = 8, 8,16\n\nlr_mae=0.5   # inline\nseed = 7\n");
  const auto c = train::parse_train_config(in, "run.cfg");
  EXPECT_EQ(c.epochs, 40u);
  EXPECT_EQ(c.edge_widths, (std::vector<std::size_t>{8, 8, 16}));
  EXPECT_EQ(c.lr_mae, 0.5);
  EXPECT_EQ(c.seed, 7u);
}

TEST(TrainConfigFile, ErrorsNameTheLine) {
  std::istringstream missing("epochs = 10\njust words\n");
  try {
    train::parse_train_config(missing, "a.cfg");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("a.cfg:2"), std::string::npos) << e.what();
  }
  std::istringstream unknown("epochs = 10\nbogus_key = 1\n");
  EXPECT_THROW(train::parse_train_config(unknown, "b.cfg"), ValidationError);
  std::istringstream bad("epochs = ten\n");
  try {
    train::parse_train_config(bad, "c.cfg");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("c.cfg:1"), std::string::npos) << e.what();
  }
}

TEST(TrainConfigFile, TextRoundTripsEveryKey) {
  train::TrainConfig c;
  c.set("alpha_ramp_epochs", "33");
  c.set("lr_spvae", "0.000123");
  c.set("imnet_skip_layers", "1,3");
  std::istringstream in(c.to_text());
  const auto back = train::parse_train_config(in);
  for (const auto& key : train::TrainConfig::keys()) EXPECT_EQ(back.get(key), c.get(key)) << key;
  EXPECT_EQ(back.lr_spvae, 0.000123);
  EXPECT_THROW(c.set("nope", "1"), ValidationError);
}

TEST(TrainConfigFile, InvariantsAreValidated) {
  train::TrainConfig c;
  c.burn_in_epochs = c.epochs;
  EXPECT_THROW(c.validate(), ValidationError);
  c = train::TrainConfig{};
  c.lr_mae = 0.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = train::TrainConfig{};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(TrainConfigFile, AlphaRamp) {
  train::TrainConfig c;
  EXPECT_DOUBLE_EQ(c.alpha(0), 0.01);
  EXPECT_DOUBLE_EQ(c.alpha(c.alpha_ramp_epochs), 1.0);
  EXPECT_DOUBLE_EQ(c.alpha(5000), 1.0);
  for (std::size_t e = 1; e < 300; ++e) EXPECT_GE(c.alpha(e), c.alpha(e - 1));
}
