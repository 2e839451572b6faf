//! Streaming TR decomposition (STR) and its randomized variants.
