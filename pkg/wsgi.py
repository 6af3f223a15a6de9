#!/usr/bin/env python3
"""
WSGI entry point for production deployment
"""
import os
import sys
import logging

# Add the project root to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

logger = logging.getLogger(__name__)


def create_production_app():
    """Create Flask app for production with database initialization."""
    from backend.app import create_app
    from backend.database.connection import init_db, test_connection

    logger.info("Starting demand response results API in production mode")

    # Stored runs are optional; sweeps and validation work without them
    try:
        if test_connection():
            init_db()
        else:
            logger.warning("Database connection failed - continuing without stored runs")
    except Exception as e:
        logger.warning(f"Database setup error: {e} - continuing without stored runs")

    app = create_app()
    logger.info("Flask app created successfully")
    return app


# Create the WSGI application
app = create_production_app()

if __name__ == "__main__":
    # For local testing
    app.run(host="0.0.0.0", port=int(os.environ.get("PORT", 8000)))
