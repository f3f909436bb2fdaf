# Dataset ingestion, composites and the bootstrap harness
