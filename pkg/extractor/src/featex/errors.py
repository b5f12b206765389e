class ExtractError(Exception):
    """Any failure the extractor can attribute to its inputs or setup."""
