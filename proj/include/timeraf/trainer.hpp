#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "timeraf/fusion.hpp"
#include "timeraf/retriever.hpp"

namespace timeraf {

enum class RetrievalPolicy { learned, random, cosine };
enum class FusionPolicy { channel_prompt, token_concat, average, none };

RetrievalPolicy retrieval_policy_from_string(const std::string& s);
FusionPolicy fusion_policy_from_string(const std::string& s);
std::string to_string(RetrievalPolicy p);
std::string to_string(FusionPolicy p);

struct TrainConfig {
    std::size_t k = 8;
    double tau_m = 0.1;
    double tau_s = 1.0;
    double rho = 0.2;
    double lambda = 1.0;
    double lr_retriever = 1e-3;
    double lr_fusion = 1e-5;
    std::size_t epochs = 2;
    // Epochs trained with the fusion module only before retriever feedback
    // updates begin. While the zero-initialized fusion is still candidate
    // insensitive the per-candidate feedback is uniform, and KL updates would
    // only flatten the retrieval scores.
    std::size_t warmup_epochs = 0;
    std::size_t e = 64;  // retrieval embedding dim
    std::uint64_t seed = 0;
    RetrievalPolicy retrieval_policy = RetrievalPolicy::learned;
    FusionPolicy fusion_policy = FusionPolicy::channel_prompt;
    std::string checkpoint_dir;  // empty = no per-epoch checkpoints

    void validate() const;
};

struct StepStats {
    double loss = 0.0;
    double l_pred = 0.0;
    double l_r_aug = 0.0;
    std::vector<std::size_t> indices;
    std::vector<bool> augmented;
};

struct TrainingLog {
    std::vector<StepStats> steps;
    std::vector<double> epoch_l_pred;
    std::size_t skipped = 0;
};

struct EvalReport {
    std::map<std::string, double> per_dataset_mse;
    std::map<std::string, std::size_t> per_dataset_windows;
    double mean_mse = 0.0;
    std::size_t n_windows = 0;
    std::vector<double> residual_mse;  // per window, in evaluation order
};

// Retriever + fusion bound to a frozen backbone and their optimizer state.
struct Pipeline {
    const BackboneParams* backbone = nullptr;
    RetrieverParams retriever;
    FusionParams fusion;
    TokenConcatParams token_concat;
    TrainConfig cfg;
    std::size_t epoch = 0;  // set by train(); gates the retriever warmup

    Grads retr_q_grads, retr_c_grads, fusion_grads, tc_grads;
    OptimizerState retr_q_opt, retr_c_opt, fusion_opt, tc_opt;
};

Pipeline make_pipeline(const BackboneParams& backbone, const TrainConfig& cfg);

// One window of joint training: retrieve, augment, forecaster feedback,
// L = L_Pred + lambda * L_R_aug, update retriever and fusion only.
StepStats train_step(Pipeline& pipe, const WindowPair& pair, const KnowledgeBase& kb,
                     std::mt19937_64& rng);

TrainingLog train(Pipeline& pipe, const std::vector<WindowPair>& pairs,
                  const KnowledgeBase& kb);

// Inference: full KB (no leakage filter), no augmentation, no updates.
Vector predict_raf(const Pipeline& pipe, const Vector& x, const KnowledgeBase& kb);

// Candidate selection shared by training and inference; exposed for traces.
std::vector<std::size_t> select_candidates(const Pipeline& pipe, const Vector& x,
                                           const KnowledgeBase& kb,
                                           std::span<const std::size_t> eligible,
                                           std::mt19937_64& rng, Vector* scores_out = nullptr);

EvalReport evaluate(const Pipeline& pipe, const std::vector<WindowPair>& pairs,
                    const KnowledgeBase& kb);

// Bare-backbone evaluation (the w/o-RAF baseline).
EvalReport evaluate_backbone(const BackboneParams& backbone,
                             const std::vector<WindowPair>& pairs);

void write_training_log_csv(const TrainingLog& log, const std::string& path);
std::string eval_report_to_json(const EvalReport& report);

}  // namespace timeraf
