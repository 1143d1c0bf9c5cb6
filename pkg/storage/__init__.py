"""Dataset ingestion and trace / summary persistence."""
