#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tagrec/config.hpp"
#include "tagrec/errors.hpp"
#include "tagrec/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 1;
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config_path, "pipeline config file")->required();
  sub->add_option("--out", args.out_dir, "artifact directory (default: current directory)");
  sub->add_option("--seed", args.seed, "override the stage's training seed");
  sub->add_option("--threads", args.threads, "worker threads for evaluation (default 1)")
      ->check(CLI::PositiveNumber);
}

tagrec::PipelineConfig load(const CommonArgs& args) {
  tagrec::PipelineConfig cfg = tagrec::load_config(args.config_path);
  tagrec::validate_config(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tag-aware hybrid recommender pipeline"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string model_out, model_path, model_name;
  std::vector<std::string> checkpoints;
  int user_id = -1;
  int top_k = 10;

  CLI::App* ingest = app.add_subcommand("ingest", "convert raw data to the canonical layout");
  add_common(ingest, args);
  CLI::App* features = app.add_subcommand("features", "materialize sparse item feature channels");
  add_common(features, args);
  CLI::App* train_encoder = app.add_subcommand("train-encoder", "train the document encoder");
  add_common(train_encoder, args);
  CLI::App* embed = app.add_subcommand("embed", "export document embeddings from the encoder");
  add_common(embed, args);
  CLI::App* train_mf = app.add_subcommand("train-mf", "train the factorization model");
  add_common(train_mf, args);
  train_mf->add_option("--model-out", model_out, "checkpoint path (default: <out>/mf.ckpt)");
  train_mf->add_option("--name", model_name, "label used in evaluation reports");
  CLI::App* evaluate = app.add_subcommand("evaluate", "recall@K comparison of checkpoints");
  add_common(evaluate, args);
  evaluate->add_option("checkpoints", checkpoints, "mf checkpoints; first is the baseline")
      ->required();
  CLI::App* recommend = app.add_subcommand("recommend", "top-k items for one user");
  add_common(recommend, args);
  recommend->add_option("--model", model_path, "mf checkpoint (default: <out>/mf.ckpt)");
  recommend->add_option("--user", user_id, "user id")->required();
  recommend->add_option("--k", top_k, "list length (default 10)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  args.seed_given = app.get_subcommands().front()->count("--seed") > 0;

  try {
    tagrec::PipelineConfig cfg = load(args);
    if (ingest->parsed()) {
      const tagrec::IngestStats stats = tagrec::run_ingest(cfg, args.out_dir);
      std::printf("%s\n", stats.summary.c_str());
    } else if (features->parsed()) {
      tagrec::run_features(cfg, args.out_dir);
      std::printf("wrote %s and %s in %s\n", tagrec::artifact::kTagFeatures,
                  tagrec::artifact::kTfidfFeatures, args.out_dir.c_str());
    } else if (train_encoder->parsed()) {
      if (args.seed_given) cfg.encoder.seed = args.seed;
      const std::vector<double> losses = tagrec::run_train_encoder(cfg, args.out_dir);
      for (std::size_t e = 0; e < losses.size(); ++e) {
        std::printf("epoch %zu  loss %.6f\n", e + 1, losses[e]);
      }
      std::printf("wrote %s\n",
                  (std::filesystem::path(args.out_dir) / tagrec::artifact::kEncoderCheckpoint)
                      .string().c_str());
    } else if (embed->parsed()) {
      const int missing = tagrec::run_embed(cfg, args.out_dir);
      std::printf("wrote %s (%d items without text)\n",
                  (std::filesystem::path(args.out_dir) / tagrec::artifact::kEmbeddings)
                      .string().c_str(),
                  missing);
    } else if (train_mf->parsed()) {
      if (args.seed_given) cfg.mf.seed = args.seed;
      if (model_out.empty()) {
        model_out =
            (std::filesystem::path(args.out_dir) / tagrec::artifact::kMfCheckpoint).string();
      }
      const std::vector<double> losses =
          tagrec::run_train_mf(cfg, args.out_dir, model_out, model_name);
      for (std::size_t e = 0; e < losses.size(); ++e) {
        std::printf("epoch %zu  loss %.6f\n", e + 1, losses[e]);
      }
      std::printf("wrote %s\n", model_out.c_str());
    } else if (evaluate->parsed()) {
      const tagrec::EvaluationReport report =
          tagrec::run_evaluate(cfg, args.out_dir, checkpoints, args.threads);
      std::fputs(report.table.c_str(), stdout);
    } else if (recommend->parsed()) {
      if (model_path.empty()) {
        model_path =
            (std::filesystem::path(args.out_dir) / tagrec::artifact::kMfCheckpoint).string();
      }
      const std::vector<tagrec::Recommendation> recs =
          tagrec::run_recommend(cfg, args.out_dir, model_path, user_id, top_k);
      for (std::size_t i = 0; i < recs.size(); ++i) {
        std::printf("%zu\t%d\t%.6f\t%s\n", i + 1, recs[i].item, recs[i].score,
                    recs[i].title.c_str());
      }
    }
  } catch (const tagrec::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const tagrec::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const tagrec::NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
