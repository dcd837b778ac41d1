from nhwork.cli import main

raise SystemExit(main())
