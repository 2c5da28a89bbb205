#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

struct sqlite3;

namespace ioev::gateway {

// String key-value store; implementations are thread-safe.
class KvStore {
public:
    virtual ~KvStore() = default;
    virtual void put(const std::string& key, const std::string& value) = 0;
    virtual std::optional<std::string> get(const std::string& key) const = 0;
    virtual bool erase(const std::string& key) = 0;
    // Keys starting with prefix, ascending.
    virtual std::vector<std::string> keys(const std::string& prefix) const = 0;
};

class MemoryStore : public KvStore {
public:
    void put(const std::string& key, const std::string& value) override;
    std::optional<std::string> get(const std::string& key) const override;
    bool erase(const std::string& key) override;
    std::vector<std::string> keys(const std::string& prefix) const override;

private:
    mutable std::mutex mu_;
    std::map<std::string, std::string> data_;
};

// Single-table SQLite store. Throws IoError when the database cannot be opened.
class SqliteStore : public KvStore {
public:
    explicit SqliteStore(const std::string& path);
    ~SqliteStore() override;
    SqliteStore(const SqliteStore&) = delete;
    SqliteStore& operator=(const SqliteStore&) = delete;

    void put(const std::string& key, const std::string& value) override;
    std::optional<std::string> get(const std::string& key) const override;
    bool erase(const std::string& key) override;
    std::vector<std::string> keys(const std::string& prefix) const override;

private:
    void exec(const std::string& sql) const;

    mutable std::mutex mu_;
    sqlite3* db_ = nullptr;
};

// Empty path or ":memory:" gives a MemoryStore.
std::unique_ptr<KvStore> open_store(const std::string& path);

}  // namespace ioev::gateway
