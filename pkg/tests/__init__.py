"""
TabTokens Test Suite

Tests for the GP5 codec, the token grammar and the corpus tools.
"""
