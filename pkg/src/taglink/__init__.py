"""Toolkit for linking user accounts across two social platforms.

The pipeline turns raw post corpora into content+context graphs via
automatic hashtag annotation, joins the two platform graphs through
shared hashtags, and resolves which accounts belong to the same person
by fusing username and graph-structure similarity scores.
"""

__version__ = "0.1.0"
