#include "ioev/gateway/store.hpp"

#include <sqlite3.h>

#include "ioev/core/error.hpp"

namespace ioev::gateway {

void MemoryStore::put(const std::string& key, const std::string& value) {
    std::lock_guard lock(mu_);
    data_[key] = value;
}

std::optional<std::string> MemoryStore::get(const std::string& key) const {
    std::lock_guard lock(mu_);
    auto it = data_.find(key);
    if (it == data_.end()) return std::nullopt;
    return it->second;
}

bool MemoryStore::erase(const std::string& key) {
    std::lock_guard lock(mu_);
    return data_.erase(key) > 0;
}

std::vector<std::string> MemoryStore::keys(const std::string& prefix) const {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (auto it = data_.lower_bound(prefix); it != data_.end() && it->first.compare(0, prefix.size(), prefix) == 0;
         ++it)
        out.push_back(it->first);
    return out;
}

namespace {

// Finalizes a prepared statement on scope exit.
struct Statement {
    sqlite3_stmt* stmt = nullptr;
    Statement(sqlite3* db, const char* sql) {
        if (sqlite3_prepare_v2(db, sql, -1, &stmt, nullptr) != SQLITE_OK)
            fail(ErrorCode::IoError, std::string("sqlite prepare: ") + sqlite3_errmsg(db));
    }
    ~Statement() { sqlite3_finalize(stmt); }
    void bind(int i, const std::string& s) { sqlite3_bind_text(stmt, i, s.data(), static_cast<int>(s.size()), SQLITE_TRANSIENT); }
};

std::string column_text(sqlite3_stmt* stmt, int i) {
    const auto* p = static_cast<const char*>(sqlite3_column_blob(stmt, i));
    return p ? std::string(p, static_cast<size_t>(sqlite3_column_bytes(stmt, i))) : std::string();
}

}  // namespace

SqliteStore::SqliteStore(const std::string& path) {
    if (sqlite3_open(path.c_str(), &db_) != SQLITE_OK) {
        std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
        sqlite3_close(db_);
        db_ = nullptr;
        fail(ErrorCode::IoError, "cannot open store '" + path + "': " + msg);
    }
    exec("CREATE TABLE IF NOT EXISTS kv (key TEXT PRIMARY KEY, value BLOB NOT NULL)");
}

SqliteStore::~SqliteStore() { sqlite3_close(db_); }

void SqliteStore::exec(const std::string& sql) const {
    char* err = nullptr;
    if (sqlite3_exec(db_, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
        std::string msg = err ? err : "unknown error";
        sqlite3_free(err);
        fail(ErrorCode::IoError, "sqlite: " + msg);
    }
}

void SqliteStore::put(const std::string& key, const std::string& value) {
    std::lock_guard lock(mu_);
    Statement s(db_, "INSERT OR REPLACE INTO kv (key, value) VALUES (?1, ?2)");
    s.bind(1, key);
    sqlite3_bind_blob(s.stmt, 2, value.data(), static_cast<int>(value.size()), SQLITE_TRANSIENT);
    if (sqlite3_step(s.stmt) != SQLITE_DONE) fail(ErrorCode::IoError, std::string("sqlite put: ") + sqlite3_errmsg(db_));
}

std::optional<std::string> SqliteStore::get(const std::string& key) const {
    std::lock_guard lock(mu_);
    Statement s(db_, "SELECT value FROM kv WHERE key = ?1");
    s.bind(1, key);
    if (sqlite3_step(s.stmt) != SQLITE_ROW) return std::nullopt;
    return column_text(s.stmt, 0);
}

bool SqliteStore::erase(const std::string& key) {
    std::lock_guard lock(mu_);
    Statement s(db_, "DELETE FROM kv WHERE key = ?1");
    s.bind(1, key);
    if (sqlite3_step(s.stmt) != SQLITE_DONE) fail(ErrorCode::IoError, std::string("sqlite erase: ") + sqlite3_errmsg(db_));
    return sqlite3_changes(db_) > 0;
}

std::vector<std::string> SqliteStore::keys(const std::string& prefix) const {
    std::lock_guard lock(mu_);
    // Range scan avoids LIKE escaping: prefix <= key < prefix + 0xFF.
    Statement s(db_, "SELECT key FROM kv WHERE key >= ?1 AND key < ?2 ORDER BY key");
    s.bind(1, prefix);
    s.bind(2, prefix + "\xff");
    std::vector<std::string> out;
    while (sqlite3_step(s.stmt) == SQLITE_ROW) out.push_back(column_text(s.stmt, 0));
    return out;
}

std::unique_ptr<KvStore> open_store(const std::string& path) {
    if (path.empty() || path == ":memory:") return std::make_unique<MemoryStore>();
    return std::make_unique<SqliteStore>(path);
}

}  // namespace ioev::gateway
