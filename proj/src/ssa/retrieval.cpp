#include "ioev/ssa/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <set>
#include <unordered_map>

#include "ioev/core/error.hpp"
#include "ioev/core/text.hpp"

namespace ioev::ssa {

std::vector<std::string> lexical_terms(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c) || c == '_') {
            cur += static_cast<char>(std::tolower(c));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

DocumentChunk make_chunk(std::string doc_id, std::string text, std::map<std::string, std::string> metadata) {
    require(!trim(text).empty(), ErrorCode::InvalidArgument, "document '" + doc_id + "' has no text");
    DocumentChunk c;
    c.terms = lexical_terms(text);
    c.doc_id = std::move(doc_id);
    c.text = std::move(text);
    c.metadata = std::move(metadata);
    return c;
}

DocumentChunk parse_document(const std::string& doc_id, const std::string& contents) {
    std::map<std::string, std::string> meta;
    std::string body = contents;
    auto lines = split(contents, '\n');
    if (!lines.empty() && trim(lines[0]) == "---") {
        size_t end = 1;
        while (end < lines.size() && trim(lines[end]) != "---") ++end;
        require(end < lines.size(), ErrorCode::ParseError, "unterminated front-matter in '" + doc_id + "'");
        for (size_t i = 1; i < end; ++i) {
            auto line = trim(lines[i]);
            if (line.empty()) continue;
            auto colon = line.find(':');
            require(colon != std::string::npos, ErrorCode::ParseError,
                    "front-matter line without ':' in '" + doc_id + "'");
            meta[trim(line.substr(0, colon))] = trim(line.substr(colon + 1));
        }
        body.clear();
        for (size_t i = end + 1; i < lines.size(); ++i) {
            body += lines[i];
            if (i + 1 < lines.size()) body += '\n';
        }
    }
    return make_chunk(doc_id, trim(body), std::move(meta));
}

std::vector<DocumentChunk> load_document_store(const std::string& dir) {
    namespace fs = std::filesystem;
    require(fs::is_directory(dir), ErrorCode::IoError, "document directory not found: " + dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        auto ext = e.path().extension().string();
        if (e.is_regular_file() && (ext == ".txt" || ext == ".md")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<DocumentChunk> out;
    for (const auto& p : files) out.push_back(parse_document(p.stem().string(), read_file(p.string())));
    return out;
}

std::vector<double> bm25_scores(const std::string& query, const std::vector<DocumentChunk>& store,
                                const Bm25Params& params) {
    const double n = static_cast<double>(store.size());
    double avgdl = 0.0;
    for (const auto& c : store) avgdl += static_cast<double>(c.terms.size());
    avgdl = store.empty() ? 0.0 : avgdl / n;

    auto qterms = lexical_terms(query);
    std::set<std::string> unique(qterms.begin(), qterms.end());

    std::vector<std::unordered_map<std::string, double>> tf(store.size());
    std::unordered_map<std::string, double> df;
    for (size_t d = 0; d < store.size(); ++d) {
        for (const auto& t : store[d].terms) {
            if (unique.count(t)) tf[d][t] += 1.0;
        }
        for (const auto& [t, _] : tf[d]) df[t] += 1.0;
    }

    std::vector<double> scores(store.size(), 0.0);
    for (const auto& t : unique) {
        double dft = df.count(t) ? df[t] : 0.0;
        if (dft == 0.0) continue;
        double idf = std::log(1.0 + (n - dft + 0.5) / (dft + 0.5));
        for (size_t d = 0; d < store.size(); ++d) {
            auto it = tf[d].find(t);
            if (it == tf[d].end()) continue;
            double f = it->second;
            double dl = static_cast<double>(store[d].terms.size());
            double norm = avgdl > 0.0 ? dl / avgdl : 0.0;
            scores[d] += idf * f * (params.k1 + 1.0) / (f + params.k1 * (1.0 - params.b + params.b * norm));
        }
    }
    return scores;
}

std::vector<ScoredChunk> retrieve_context(const std::string& query, const std::vector<DocumentChunk>& store, size_t k,
                                          const Bm25Params& params) {
    require(!store.empty(), ErrorCode::EmptyStore, "document store is empty");
    require(k >= 1, ErrorCode::InvalidArgument, "k must be at least 1");
    auto scores = bm25_scores(query, store, params);
    std::vector<ScoredChunk> ranked;
    ranked.reserve(store.size());
    for (size_t i = 0; i < store.size(); ++i) ranked.push_back({&store[i], scores[i]});
    std::sort(ranked.begin(), ranked.end(), [](const ScoredChunk& a, const ScoredChunk& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.chunk->doc_id < b.chunk->doc_id;
    });
    if (ranked.size() > k) ranked.resize(k);
    return ranked;
}

}  // namespace ioev::ssa
