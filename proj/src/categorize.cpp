#include "llmeval/categorize.hpp"

#include "llmeval/corpus.hpp"
#include "llmeval/errors.hpp"
#include "llmeval/text_util.hpp"

#include <algorithm>
#include <set>

namespace llmeval {

std::string_view category_name(SkillCategory c) {
    switch (c) {
        case SkillCategory::Knowledge: return "Knowledge";
        case SkillCategory::Reasoning: return "Reasoning";
        case SkillCategory::Math: return "Math";
        case SkillCategory::Coding: return "Coding";
        case SkillCategory::Multimodality: return "Multimodality";
        case SkillCategory::InstructionFollowing: return "Instruction Following";
        case SkillCategory::Safety: return "Safety";
        case SkillCategory::Multilinguality: return "Multilinguality";
        case SkillCategory::ToolUse: return "Tool Use";
        case SkillCategory::Other: return "Other";
    }
    return "Other";
}

std::optional<SkillCategory> parse_category(std::string_view name) {
    auto t = Taxonomy::skills().match(name);
    if (!t) return std::nullopt;
    for (auto c : kAllCategories)
        if (category_name(c) == *t) return c;
    return std::nullopt;
}

Taxonomy Taxonomy::skills() {
    Taxonomy t;
    const char* defs[] = {
        "recalling facts about the world or a specialized domain",
        "drawing inferences: commonsense, logical, multi-step or causal",
        "arithmetic, word problems and formal mathematics",
        "writing, completing or understanding program code",
        "inputs beyond plain text such as images, charts, audio or video",
        "following explicit format or content constraints in an instruction",
        "harmful content, bias, toxicity, truthfulness or robustness to attacks",
        "languages other than English or translation between languages",
        "calling tools, APIs or acting as an agent in an environment",
        "none of the above",
    };
    for (std::size_t i = 0; i < kAllCategories.size(); ++i) {
        t.labels.emplace_back(category_name(kAllCategories[i]));
        t.definitions.emplace_back(defs[i]);
    }
    return t;
}

Taxonomy Taxonomy::reasoning_types() {
    return {{"Math", "Symbolic and algorithmic", "Spatial and temporal reasoning", "Logical reasoning",
             "Commonsense reasoning", "Multi-hop QA", "Context-aware QA", "Encyclopedic knowledge", "Generation",
             "Text classification", "Entailment"},
            {"numeric and mathematical problem solving",
             "manipulating symbols or executing algorithms step by step",
             "reasoning about positions, directions, times or orderings",
             "deduction over stated premises and rules",
             "everyday knowledge about people, objects and situations",
             "answering questions that chain several facts",
             "answering questions from a given passage or document",
             "recalling encyclopedic facts",
             "producing free-form text such as summaries, translations or stories",
             "assigning a label to a text",
             "judging whether one statement follows from another"},
            "Other"};
}

Taxonomy Taxonomy::negative_traits() {
    return {{"Expert Knowledge", "Faithfulness", "Complex Reasoning", "Information Synthesis", "Cognitive Tasks",
             "Affective Analysis", "Structured Prediction", "Other"},
            {"depends on specialized domain expertise",
             "requires staying faithful to a given source or instruction",
             "requires long or intricate chains of reasoning",
             "requires combining information from many places",
             "probes perception, memory or other cognitive abilities",
             "concerns emotion, sentiment or social signals",
             "asks for structured outputs such as tags, spans or graphs",
             "none of the above"},
            "Other"};
}

void Taxonomy::validate() const {
    if (labels.empty()) throw PreconditionError("taxonomy has no labels");
    if (!definitions.empty() && definitions.size() != labels.size())
        throw PreconditionError("taxonomy definitions do not match its labels");
}

std::string Taxonomy::render() const {
    std::string out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out += "- " + labels[i];
        if (i < definitions.size()) out += ": " + definitions[i];
        out += '\n';
    }
    if (std::find(labels.begin(), labels.end(), fallback) == labels.end())
        out += "- " + fallback + ": none of the above\n";
    if (!out.empty()) out.pop_back();
    return out;
}

std::optional<std::string> Taxonomy::match(std::string_view token) const {
    auto t = text::to_lower(text::trim(token));
    auto paren = t.find('(');
    auto bare = paren == std::string::npos ? t : text::trim(t.substr(0, paren));
    for (const auto& l : labels) {
        auto ll = text::to_lower(l);
        if (ll == t || ll == bare) return l;
    }
    if (text::to_lower(fallback) == t || text::to_lower(fallback) == bare) return fallback;
    return std::nullopt;
}

LabelParse parse_label_reply(std::string_view reply, const Taxonomy& taxonomy, bool single) {
    std::string flat(reply);
    for (char& c : flat)
        if (c == ';' || c == '\n' || c == '\r') c = ',';
    std::set<std::string> hits;
    std::string first;
    for (auto token : text::split(flat, ',')) {
        auto t = text::trim(token);
        // list decoration: bullets, numbering, quotes, trailing periods
        while (!t.empty() && (t.front() == '-' || t.front() == '*' || t.front() == '"' || t.front() == '\'' ||
                              t.front() == '[' || std::isdigit(static_cast<unsigned char>(t.front())) ||
                              t.front() == '.' || t.front() == ')' || t.front() == ' '))
            t.erase(0, 1);
        while (!t.empty() && (t.back() == '.' || t.back() == '"' || t.back() == '\'' || t.back() == ']'))
            t.pop_back();
        if (text::starts_with_ci(t, "label:")) t = text::trim(t.substr(6));
        auto m = taxonomy.match(t);
        if (!m) continue;
        if (first.empty()) first = *m;
        hits.insert(*m);
    }

    LabelParse out;
    if (single) {
        if (!first.empty()) out.labels.push_back(first);
    } else {
        if (hits.size() > 1) hits.erase(taxonomy.fallback);
        for (const auto& l : taxonomy.labels)
            if (hits.count(l)) out.labels.push_back(l);
        if (hits.count(taxonomy.fallback) &&
            std::find(taxonomy.labels.begin(), taxonomy.labels.end(), taxonomy.fallback) == taxonomy.labels.end())
            out.labels.push_back(taxonomy.fallback);
    }
    if (out.labels.empty()) {
        out.labels.push_back(taxonomy.fallback);
        out.flagged = true;
    }
    return out;
}

json to_json(const CategoryAssignment& a) {
    return {{"record_id", a.record_id}, {"labels", a.labels}, {"flagged", a.flagged}, {"note", a.note}};
}

CategoryAssignment assignment_from_json(const json& j) {
    try {
        CategoryAssignment a;
        a.record_id = j.at("record_id").get<std::string>();
        a.labels = j.at("labels").get<std::vector<std::string>>();
        a.flagged = j.value("flagged", false);
        a.note = j.value("note", "");
        if (a.labels.empty()) throw SchemaError("assignment for " + a.record_id + " has no labels");
        return a;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("bad category assignment: ") + e.what());
    }
}

std::string description_text(const std::optional<DatasetDescription>& d) {
    if (!d) return "";
    std::string out = d->summary;
    if (!d->task_explanation.empty()) out += " " + d->task_explanation;
    if (!d->subset_description.empty()) out += " " + d->subset_description;
    return out;
}

std::string render_category_prompt(const PromptTemplate& tmpl, const Taxonomy& taxonomy, const std::string& dataset,
                                   const std::string& subset, const std::string& description) {
    taxonomy.validate();
    return tmpl.render({{"taxonomy", taxonomy.render()},
                        {"dataset", dataset},
                        {"subset", subset},
                        {"description", description.empty() ? std::string(kMissing) : description}});
}

namespace {

std::string record_prompt(const NormalizedRecord& r, const Taxonomy& taxonomy, const PromptTemplate& tmpl) {
    return render_category_prompt(tmpl, taxonomy, r.fields().dataset, r.fields().subset,
                                  description_text(r.description));
}

CategoryAssignment from_reply(const std::string& id, const std::string& reply, const Taxonomy& taxonomy) {
    auto parsed = parse_label_reply(reply, taxonomy);
    return {id, parsed.labels, parsed.flagged, parsed.flagged ? "unrecognized-labels" : ""};
}

}  // namespace

CategoryAssignment categorize_record(const NormalizedRecord& record, Gateway& gateway, const PromptTemplate& tmpl) {
    return alt_categorize_record(record, Taxonomy::skills(), gateway, tmpl);
}

CategoryAssignment alt_categorize_record(const NormalizedRecord& record, const Taxonomy& taxonomy, Gateway& gateway,
                                         const PromptTemplate& tmpl) {
    return from_reply(record.record_id, gateway.complete(record_prompt(record, taxonomy, tmpl)), taxonomy);
}

std::vector<CategoryAssignment> categorize_records(const std::vector<NormalizedRecord>& records,
                                                   const Taxonomy& taxonomy, Gateway& gateway,
                                                   const PromptTemplate& tmpl) {
    taxonomy.validate();
    std::map<std::string, std::size_t> slot;
    std::vector<std::string> prompts;
    std::vector<std::size_t> record_slot;
    for (const auto& r : records) {
        auto key = r.canonical_dataset + '\x1f' + r.fields().subset + '\x1f' + description_text(r.description);
        auto [it, fresh] = slot.emplace(key, prompts.size());
        if (fresh) prompts.push_back(record_prompt(r, taxonomy, tmpl));
        record_slot.push_back(it->second);
    }
    std::vector<CategoryAssignment> out;
    if (prompts.empty()) return out;

    auto batch = gateway.complete_batch(prompts);
    std::vector<std::string> failure(prompts.size());
    for (const auto& e : batch.errors) failure[e.index] = "gateway-error: " + e.kind;
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto s = record_slot[i];
        if (batch.responses[s]) {
            out.push_back(from_reply(records[i].record_id, *batch.responses[s], taxonomy));
        } else {
            out.push_back({records[i].record_id, {taxonomy.fallback}, true, failure[s]});
        }
    }
    return out;
}

std::vector<TrendCell> quarterly_trend(const std::vector<NormalizedRecord>& records,
                                       const std::vector<CategoryAssignment>& assignments) {
    std::map<std::string, const CategoryAssignment*> by_id;
    for (const auto& a : assignments) by_id[a.record_id] = &a;
    std::map<std::pair<std::string, std::string>, std::set<std::string>> triples;
    for (const auto& r : records) {
        auto it = by_id.find(r.record_id);
        if (it == by_id.end()) continue;
        auto quarter = arxiv_id_to_quarter(r.source.paper_id);
        auto triple = r.source.paper_id + '\x1f' + r.canonical_dataset + '\x1f' + r.fields().subset;
        for (const auto& l : it->second->labels) triples[{l, quarter}].insert(triple);
    }
    std::vector<TrendCell> out;
    for (const auto& [k, s] : triples) out.push_back({k.first, k.second, s.size()});
    return out;
}

}  // namespace llmeval
