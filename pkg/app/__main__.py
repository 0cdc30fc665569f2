# app/__main__.py
from app.main import main

raise SystemExit(main())
