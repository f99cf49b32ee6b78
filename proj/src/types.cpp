#include "llmeval/types.hpp"

#include "llmeval/errors.hpp"

namespace llmeval {

std::string_view canonical_name(TargetModel m) {
    switch (m) {
        case TargetModel::Gpt4: return "GPT-4";
        case TargetModel::Gpt4o: return "GPT-4o";
        case TargetModel::Claude3Opus: return "Claude3-Opus";
        case TargetModel::Gemini10Pro: return "Gemini1.0-Pro";
    }
    return "GPT-4";
}

std::string_view prompt_name(TargetModel m) {
    switch (m) {
        case TargetModel::Gpt4: return "GPT-4";
        case TargetModel::Gpt4o: return "GPT-4o";
        case TargetModel::Claude3Opus: return "Claude3 Opus";
        case TargetModel::Gemini10Pro: return "Gemini 1.0 Pro";
    }
    return "GPT-4";
}

std::optional<TargetModel> parse_target_model(std::string_view canonical) {
    for (auto m : kAllTargets)
        if (canonical_name(m) == canonical) return m;
    return std::nullopt;
}

std::string_view metric_name(Metric m) {
    switch (m) {
        case Metric::Accuracy: return "Accuracy";
        case Metric::ExactMatch: return "Exact Match";
        case Metric::F1: return "F1";
        case Metric::Bleu: return "BLEU";
        case Metric::Rouge: return "Rouge";
        case Metric::Mrr: return "MRR";
        case Metric::Precision: return "Precision";
        case Metric::Recall: return "Recall";
        case Metric::PearsonCorrelation: return "Pearson Correlation Coefficient";
        case Metric::Mae: return "MAE";
        case Metric::Mse: return "MSE";
    }
    return "Accuracy";
}

std::optional<Metric> parse_metric_name(std::string_view exact_name) {
    for (auto m : kAllMetrics)
        if (metric_name(m) == exact_name) return m;
    return std::nullopt;
}

std::string& field_ref(TemplateFields& f, std::string_view key) {
    if (key == "value") return f.value;
    if (key == "dataset") return f.dataset;
    if (key == "dataset_citation_tag") return f.dataset_citation_tag;
    if (key == "subset") return f.subset;
    if (key == "model_name") return f.model_name;
    if (key == "metric") return f.metric;
    if (key == "prompting_method") return f.prompting_method;
    if (key == "number_of_shots") return f.number_of_shots;
    throw PreconditionError("unknown template field: " + std::string(key));
}

const std::string& field_ref(const TemplateFields& f, std::string_view key) {
    return field_ref(const_cast<TemplateFields&>(f), key);
}

std::string_view source_name(DescriptionSource s) {
    switch (s) {
        case DescriptionSource::InternalKnowledge: return "internal_knowledge";
        case DescriptionSource::TablePaper: return "table_paper";
        case DescriptionSource::LinkedDatasetPaper: return "linked_dataset_paper";
    }
    return "internal_knowledge";
}

std::optional<DescriptionSource> parse_source_name(std::string_view s) {
    if (s == "internal_knowledge") return DescriptionSource::InternalKnowledge;
    if (s == "table_paper") return DescriptionSource::TablePaper;
    if (s == "linked_dataset_paper") return DescriptionSource::LinkedDatasetPaper;
    return std::nullopt;
}

}  // namespace llmeval
