#pragma once

#include "llmeval/jsonl.hpp"

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace llmeval {

struct DblpHit {
    std::string title;
    std::string type;
    std::string venue;
    std::string year;
};

/// Title search against the DBLP publication index. Throws TransportError on failure.
class DblpClient {
public:
    virtual ~DblpClient() = default;
    virtual std::vector<DblpHit> search(const std::string& query) = 0;
};

/// Reads `result.hits.hit[*].info` of a DBLP search response.
std::vector<DblpHit> parse_dblp_response(const json& body);

class HttpDblpClient : public DblpClient {
public:
    explicit HttpDblpClient(std::string base_url = "https://dblp.org", int max_hits = 30,
                            std::chrono::seconds timeout = std::chrono::seconds(30));
    std::vector<DblpHit> search(const std::string& query) override;

private:
    std::string base_url_;
    int max_hits_;
    std::chrono::seconds timeout_;
};

/// Replays responses from a JSON file: `{"<query>": <api body> | {"error": "transport"}}`.
/// A query absent from the file is a transport failure.
class RecordedDblpClient : public DblpClient {
public:
    explicit RecordedDblpClient(json recorded);
    static RecordedDblpClient load(const std::filesystem::path& path);
    std::vector<DblpHit> search(const std::string& query) override;

private:
    json recorded_;
};

/// Lowercase, punctuation dropped, whitespace collapsed.
std::string fold_title(std::string_view title);

bool is_peer_reviewed_type(std::string_view dblp_type);

enum class VenueStatus { PeerReviewed, NotFound, Ambiguous, Unknown };

std::string_view venue_status_name(VenueStatus s);

struct VenueDecision {
    std::string paper_id;
    std::string title;
    VenueStatus status = VenueStatus::Unknown;
    std::string venue;
    double similarity = 0.0;
    std::string note;
};

struct VenueReport {
    std::vector<std::string> peer_reviewed;
    std::vector<VenueDecision> decisions;
};

inline constexpr double kDefaultTitleSimilarity = 0.9;

/// A paper passes when a journal or conference hit matches its folded title with at least
/// `threshold` edit similarity. Matches in two different venues are ambiguous and excluded,
/// as are papers whose lookup failed.
VenueReport venue_filter(const std::vector<std::string>& paper_ids, const std::vector<std::string>& titles,
                         DblpClient& client, double threshold = kDefaultTitleSimilarity);

}  // namespace llmeval
