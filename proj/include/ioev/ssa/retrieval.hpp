#pragma once

#include <map>
#include <string>
#include <vector>

namespace ioev::ssa {

struct DocumentChunk {
    std::string doc_id;
    std::string text;
    std::vector<std::string> terms;  // lexical tokens of text
    std::map<std::string, std::string> metadata;
};

// Lower-cased runs of [a-z0-9_].
std::vector<std::string> lexical_terms(const std::string& text);

// Throws InvalidArgument on empty text.
DocumentChunk make_chunk(std::string doc_id, std::string text, std::map<std::string, std::string> metadata = {});

// One chunk per *.txt / *.md file; doc_id is the file stem. An optional
// front-matter block delimited by "---" lines holds "key: value" metadata.
std::vector<DocumentChunk> load_document_store(const std::string& dir);
DocumentChunk parse_document(const std::string& doc_id, const std::string& contents);

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct ScoredChunk {
    const DocumentChunk* chunk = nullptr;
    double score = 0.0;
};

// Okapi BM25 with idf = ln(1 + (N - df + 0.5) / (df + 0.5)); each distinct
// query term counts once.
std::vector<double> bm25_scores(const std::string& query, const std::vector<DocumentChunk>& store,
                                const Bm25Params& params = {});

// Top-k by score, ties by doc_id. Throws EmptyStore and InvalidArgument (k == 0).
std::vector<ScoredChunk> retrieve_context(const std::string& query, const std::vector<DocumentChunk>& store, size_t k,
                                          const Bm25Params& params = {});

}  // namespace ioev::ssa
