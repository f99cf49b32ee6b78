#include "llmeval/dblp.hpp"

#include "llmeval/errors.hpp"
#include "llmeval/text_util.hpp"

#include "httplib.h"

#include <cctype>
#include <set>

namespace llmeval {

std::vector<DblpHit> parse_dblp_response(const json& body) {
    std::vector<DblpHit> out;
    const auto* hits = &body;
    for (const char* k : {"result", "hits"}) {
        if (!hits->is_object() || !hits->contains(k)) return out;
        hits = &(*hits)[k];
    }
    if (!hits->contains("hit")) return out;
    for (const auto& h : (*hits)["hit"]) {
        if (!h.contains("info")) continue;
        const auto& info = h["info"];
        auto str = [&](const char* k) -> std::string {
            if (!info.contains(k)) return "";
            const auto& v = info[k];
            if (v.is_string()) return v.get<std::string>();
            if (v.is_array() && !v.empty() && v[0].is_string()) return v[0].get<std::string>();
            return v.dump();
        };
        out.push_back({str("title"), str("type"), str("venue"), str("year")});
    }
    return out;
}

HttpDblpClient::HttpDblpClient(std::string base_url, int max_hits, std::chrono::seconds timeout)
    : base_url_(std::move(base_url)), max_hits_(max_hits), timeout_(timeout) {}

std::vector<DblpHit> HttpDblpClient::search(const std::string& query) {
    httplib::Client client(base_url_);
    client.set_connection_timeout(timeout_.count(), 0);
    client.set_read_timeout(timeout_.count(), 0);
    httplib::Params params = {{"q", query}, {"format", "json"}, {"h", std::to_string(max_hits_)}};
    auto res = client.Get("/search/publ/api", params, httplib::Headers{});
    if (!res) throw TransportError("DBLP request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw TransportError("DBLP returned HTTP " + std::to_string(res->status));
    try {
        return parse_dblp_response(json::parse(res->body));
    } catch (const json::exception& e) {
        throw TransportError(std::string("DBLP response is not JSON: ") + e.what());
    }
}

RecordedDblpClient::RecordedDblpClient(json recorded) : recorded_(std::move(recorded)) {
    if (!recorded_.is_object()) throw SchemaError("recorded DBLP file must hold an object keyed by query");
}

RecordedDblpClient RecordedDblpClient::load(const std::filesystem::path& path) {
    try {
        return RecordedDblpClient(json::parse(text::read_file(path)));
    } catch (const json::exception& e) {
        throw SchemaError("recorded DBLP file " + path.string() + ": " + e.what());
    }
}

std::vector<DblpHit> RecordedDblpClient::search(const std::string& query) {
    auto it = recorded_.find(query);
    if (it == recorded_.end()) throw TransportError("no recorded DBLP response for '" + query + "'");
    if (it->is_object() && it->value("error", "") == "transport")
        throw TransportError("recorded DBLP failure for '" + query + "'");
    return parse_dblp_response(*it);
}

std::string fold_title(std::string_view title) {
    std::string out;
    for (char c : title) {
        auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u) || u >= 0x80) out += static_cast<char>(std::tolower(u));
        else if (!out.empty() && out.back() != ' ') out += ' ';
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

bool is_peer_reviewed_type(std::string_view dblp_type) {
    return dblp_type == "Conference and Workshop Papers" || dblp_type == "Journal Articles";
}

std::string_view venue_status_name(VenueStatus s) {
    switch (s) {
        case VenueStatus::PeerReviewed: return "peer-reviewed";
        case VenueStatus::NotFound: return "not-found";
        case VenueStatus::Ambiguous: return "ambiguous";
        case VenueStatus::Unknown: return "unknown";
    }
    return "unknown";
}

VenueReport venue_filter(const std::vector<std::string>& paper_ids, const std::vector<std::string>& titles,
                         DblpClient& client, double threshold) {
    if (paper_ids.size() != titles.size()) throw PreconditionError("paper ids and titles differ in length");
    VenueReport report;
    for (std::size_t i = 0; i < paper_ids.size(); ++i) {
        VenueDecision d{paper_ids[i], titles[i], VenueStatus::NotFound, "", 0.0, ""};
        auto folded = fold_title(titles[i]);
        if (folded.empty()) {
            d.status = VenueStatus::Unknown;
            d.note = "no title";
            report.decisions.push_back(std::move(d));
            continue;
        }
        std::vector<DblpHit> hits;
        try {
            hits = client.search(folded);
        } catch (const TransportError& e) {
            d.status = VenueStatus::Unknown;
            d.note = e.what();
            report.decisions.push_back(std::move(d));
            continue;
        }
        std::set<std::string> venues;
        for (const auto& h : hits) {
            if (!is_peer_reviewed_type(h.type)) continue;
            double sim = text::edit_similarity(folded, fold_title(h.title));
            if (sim < threshold) continue;
            venues.insert(h.venue);
            if (sim > d.similarity) {
                d.similarity = sim;
                d.venue = h.venue;
            }
        }
        if (venues.size() == 1) {
            d.status = VenueStatus::PeerReviewed;
            report.peer_reviewed.push_back(d.paper_id);
        } else if (venues.size() > 1) {
            d.status = VenueStatus::Ambiguous;
            std::vector<std::string> v(venues.begin(), venues.end());
            d.note = text::join(v, "; ");
        }
        report.decisions.push_back(std::move(d));
    }
    return report;
}

}  // namespace llmeval
